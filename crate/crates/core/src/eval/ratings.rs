//! Append-only JSON-lines store of rating records.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::humaneval::{RatingRecord, SYSTEMS_PER_ITEM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Appended {
    Stored,
    /// The annotator already rated this output; nothing was written.
    Duplicate,
}

pub struct RatingStore {
    path: PathBuf,
    records: Vec<RatingRecord>,
    seen: HashSet<(String, usize, usize)>,
    file: Option<File>,
}

impl RatingStore {
    /// Loads existing records; a missing file is an empty store. A
    /// truncated final line from an interrupted write is dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut store = RatingStore {
            path: path.clone(),
            records: Vec::new(),
            seen: HashSet::new(),
            file: None,
        };
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            for (i, line) in lines.iter().enumerate() {
                match serde_json::from_str::<RatingRecord>(line) {
                    Ok(r) => {
                        store.seen.insert(Self::key(&r));
                        store.records.push(r);
                    }
                    Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                        log::warn!("{}: dropping truncated last line", path.display());
                    }
                    Err(e) => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        Ok(store)
    }

    fn key(r: &RatingRecord) -> (String, usize, usize) {
        (r.annotator.clone(), r.item, r.display_index)
    }

    pub fn records(&self) -> &[RatingRecord] {
        &self.records
    }

    pub fn contains(&self, annotator: &str, item: usize, display_index: usize) -> bool {
        self.seen.contains(&(annotator.to_string(), item, display_index))
    }

    /// Whether `annotator` has rated all outputs of `item`.
    pub fn item_done(&self, annotator: &str, item: usize) -> bool {
        (0..SYSTEMS_PER_ITEM).all(|d| self.contains(annotator, item, d))
    }

    /// Validates, then writes the record as one line with a single write.
    pub fn append(&mut self, record: RatingRecord) -> Result<Appended> {
        record.validate()?;
        if self.seen.contains(&Self::key(&record)) {
            return Ok(Appended::Duplicate);
        }
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        if self.file.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            self.file = Some(f);
        }
        let f = self.file.as_mut().expect("opened above");
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        f.flush().map_err(|e| Error::io(&self.path, e))?;
        self.seen.insert(Self::key(&record));
        self.records.push(record);
        Ok(Appended::Stored)
    }
}
