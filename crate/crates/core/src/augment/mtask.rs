//! GEC corrections reused as informal-to-formal pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::textdata::{apply_edits, io, parse_m2, M2Record, ParallelDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorMode {
    /// One pair per annotator with real edits.
    #[default]
    All,
    /// Only the lowest annotator id of each record.
    First,
}

/// Pairs in record order, then annotator id. Identity results are dropped.
pub fn mtask_pairs(records: &[M2Record], mode: AnnotatorMode) -> ParallelDataset {
    let mut pairs = Vec::new();
    for record in records {
        let annotators = record.annotators();
        let chosen: Vec<u32> = match mode {
            AnnotatorMode::All => annotators.into_iter().collect(),
            AnnotatorMode::First => annotators.into_iter().take(1).collect(),
        };
        pairs.extend(chosen.into_iter().filter_map(|a| apply_edits(record, a)));
    }
    ParallelDataset::new(pairs)
        .with_meta("method", "mtask")
        .with_meta("annotators", format!("{mode:?}").to_lowercase())
}

/// Reads and converts every M2 file, in the given order. The file names
/// are listed in the `source_files` metadata entry.
pub fn mtask_from_files<P: AsRef<Path>>(paths: &[P], mode: AnnotatorMode) -> Result<ParallelDataset> {
    let mut records = Vec::new();
    let mut names = Vec::new();
    for path in paths {
        let path = path.as_ref();
        records.extend(parse_m2(&io::read_text(path)?)?);
        names.push(
            path.file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        );
    }
    Ok(mtask_pairs(&records, mode).with_meta("source_files", names.join(",")))
}
