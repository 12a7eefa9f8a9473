//! Reading and writing corpora, datasets and test sets.
//!
//! Line corpora hold one sentence per line. TSV parallel files hold
//! `source<TAB>target`. Datasets use JSON lines (one [`ParallelPair`] per
//! line); non-empty metadata lives next to the file in `<path>.meta.json`.
//! Multi-reference test sets are TSV with the source followed by the four
//! references.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{
    Corpus, MultiRefItem, MultiRefTestSet, ParallelDataset, ParallelPair, Sentence,
    REFERENCES_PER_ITEM,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Lines,
    TsvParallel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Loaded {
    Corpus(Corpus),
    Parallel(ParallelDataset),
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Loaded> {
    Ok(match format {
        CorpusFormat::Lines => Loaded::Corpus(load_lines(path)?),
        CorpusFormat::TsvParallel => Loaded::Parallel(load_tsv(path)?),
    })
}

/// Reads a file and validates it as UTF-8, reporting the first bad byte.
pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.utf8_error().valid_up_to(),
    })
}

pub fn parse_lines(name: &str, text: &str) -> Result<Corpus> {
    let sentences = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Sentence::new)
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(name, sentences))
}

pub fn load_lines(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = read_text(path)?;
    parse_lines(&file_stem(path), &text)
}

pub fn parse_tsv(text: &str) -> Result<ParallelDataset> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `source<TAB>target`".into(),
        })?;
        let parse = |s: &str| {
            Sentence::new(s).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        };
        pairs.push(ParallelPair::original(parse(src)?, parse(tgt)?));
    }
    Ok(ParallelDataset::new(pairs))
}

pub fn load_tsv(path: impl AsRef<Path>) -> Result<ParallelDataset> {
    parse_tsv(&read_text(path)?)
}

pub fn save_lines<'a>(
    path: impl AsRef<Path>,
    sentences: impl IntoIterator<Item = &'a Sentence>,
) -> Result<()> {
    let mut out = String::new();
    for s in sentences {
        out.push_str(s.as_str());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn save_tsv(path: impl AsRef<Path>, dataset: &ParallelDataset) -> Result<()> {
    let mut out = String::new();
    for p in &dataset.pairs {
        out.push_str(p.source.as_str());
        out.push('\t');
        out.push_str(p.target.as_str());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Labeled sentences as `label<TAB>sentence`, label 1 for formal and 0 for informal.
pub fn parse_labeled(text: &str) -> Result<Vec<(Sentence, bool)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse { line: i + 1, message };
        let (label, sentence) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `label<TAB>sentence`".into()))?;
        let formal = match label.trim() {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push((Sentence::new(sentence).map_err(|e| bad(e.to_string()))?, formal));
    }
    Ok(out)
}

pub fn load_labeled(path: impl AsRef<Path>) -> Result<Vec<(Sentence, bool)>> {
    parse_labeled(&read_text(path)?)
}

pub fn save_labeled(path: impl AsRef<Path>, labeled: &[(Sentence, bool)]) -> Result<()> {
    let mut out = String::new();
    for (s, formal) in labeled {
        out.push_str(if *formal { "1\t" } else { "0\t" });
        out.push_str(s.as_str());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn to_jsonl(dataset: &ParallelDataset) -> Result<String> {
    let mut out = String::new();
    for p in &dataset.pairs {
        out.push_str(&serde_json::to_string(p)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<ParallelDataset> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(ParallelDataset::new(pairs))
}

fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn save_jsonl(path: impl AsRef<Path>, dataset: &ParallelDataset) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, to_jsonl(dataset)?.as_bytes())?;
    let meta = meta_path(path);
    if dataset.metadata.is_empty() {
        if meta.exists() {
            fs::remove_file(&meta).map_err(|e| Error::io(&meta, e))?;
        }
    } else {
        write_atomic(&meta, serde_json::to_string_pretty(&dataset.metadata)?.as_bytes())?;
    }
    Ok(())
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<ParallelDataset> {
    let path = path.as_ref();
    let mut dataset = parse_jsonl(&read_text(path)?)?;
    let meta = meta_path(path);
    if meta.exists() {
        let map: BTreeMap<String, String> = serde_json::from_str(&read_text(&meta)?)?;
        dataset.metadata = map;
    }
    Ok(dataset)
}

/// Loads a dataset by extension: `.jsonl` as JSON lines, anything else as TSV.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<ParallelDataset> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        load_jsonl(path)
    } else {
        load_tsv(path)
    }
}

pub fn parse_multiref(text: &str) -> Result<MultiRefTestSet> {
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 1 + REFERENCES_PER_ITEM {
            return Err(Error::Parse {
                line: i + 1,
                message: format!(
                    "expected source and {REFERENCES_PER_ITEM} references, found {} fields",
                    fields.len()
                ),
            });
        }
        let sentences = fields
            .iter()
            .map(|f| Sentence::new(f))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        items.push(MultiRefItem {
            source: sentences[0].clone(),
            references: sentences[1..].to_vec(),
        });
    }
    MultiRefTestSet::new(items)
}

pub fn load_multiref(path: impl AsRef<Path>) -> Result<MultiRefTestSet> {
    parse_multiref(&read_text(path)?)
}

pub fn save_multiref(path: impl AsRef<Path>, set: &MultiRefTestSet) -> Result<()> {
    let mut out = String::new();
    for item in set.items() {
        out.push_str(item.source.as_str());
        for r in &item.references {
            out.push('\t');
            out.push_str(r.as_str());
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.tsv");
        let data = vec![
            (Sentence::new("Thank you .").unwrap(), true),
            (Sentence::new("thx").unwrap(), false),
        ];
        save_labeled(&path, &data).unwrap();
        assert_eq!(load_labeled(&path).unwrap(), data);
        assert!(matches!(parse_labeled("2\thi"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_labeled("hi").is_err());
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        fs::write(&path, "").unwrap();
        assert!(load_lines(&path).unwrap().is_empty());
    }

    #[test]
    fn blank_lines_are_skipped() {
        let c = parse_lines("x", "one\n\ntwo\nthree\n").unwrap();
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn crlf_and_lf_load_identically() {
        let dir = tempfile::tempdir().unwrap();
        let lines = ["a b", "c  d", "e", "f g h", "i"];
        let lf = dir.path().join("c.txt");
        let crlf = dir.path().join("c2.txt");
        fs::write(&lf, lines.join("\n")).unwrap();
        fs::write(&crlf, lines.join("\r\n") + "\r\n").unwrap();
        let a = load_lines(&lf).unwrap();
        let b = load_lines(&crlf).unwrap();
        assert_eq!(a.sentences, b.sentences);
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn bad_utf8_names_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, b"ok line\nbro\xffken").unwrap();
        match load_lines(&path) {
            Err(Error::Decode { offset }) => assert_eq!(offset, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_without_tab_names_line() {
        match parse_tsv("a\tb\nno tab here\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_splits_on_first_tab() {
        let ds = parse_tsv("a\tb\tc\n").unwrap();
        assert_eq!(ds.pairs[0].target.as_str(), "b c");
    }

    #[test]
    fn jsonl_metadata_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = parse_tsv("hi u\tHi you.\n").unwrap().with_meta("seed", "7");
        save_jsonl(&path, &ds).unwrap();
        assert_eq!(load_jsonl(&path).unwrap(), ds);
    }

    #[test]
    fn multiref_round_trip() {
        let text = "hi u\tHi you.\tHello you.\tHi you.\tHi there.\n";
        let set = parse_multiref(text).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.multiref");
        save_multiref(&path, &set).unwrap();
        assert_eq!(load_multiref(&path).unwrap(), set);
        assert!(parse_multiref("a\tb\n").is_err());
    }
}
