//! Append-only JSON-lines cache of round-trip results.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    key: String,
    provider: String,
    pivot: String,
    text: String,
    rewrite: String,
}

/// SHA-256 of (provider id, pivot, text), hex encoded.
pub fn cache_key(provider: &str, pivot: &str, text: &str) -> String {
    let mut h = Sha256::new();
    for part in [provider, pivot, text] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

pub struct RoundTripCache {
    path: Option<PathBuf>,
    entries: HashMap<String, String>,
    writer: Mutex<Option<File>>,
}

impl RoundTripCache {
    /// Cache that only lives in memory.
    pub fn in_memory() -> Self {
        RoundTripCache {
            path: None,
            entries: HashMap::new(),
            writer: Mutex::new(None),
        }
    }

    /// Loads `path` if it exists. A truncated final line (an interrupted
    /// append) is ignored.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            for (i, line) in lines.iter().enumerate() {
                match serde_json::from_str::<Entry>(line) {
                    Ok(e) => {
                        entries.insert(e.key, e.rewrite);
                    }
                    Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                        log::warn!("{}: ignoring truncated last line", path.display());
                    }
                    Err(e) => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: format!("{}: {e}", path.display()),
                        })
                    }
                }
            }
        }
        Ok(RoundTripCache {
            path: Some(path),
            entries,
            writer: Mutex::new(None),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, provider: &str, pivot: &str, text: &str) -> Option<&str> {
        self.entries.get(&cache_key(provider, pivot, text)).map(String::as_str)
    }

    /// Records a result in memory and appends it to the file with a single
    /// write.
    pub fn insert(&mut self, provider: &str, pivot: &str, text: &str, rewrite: &str) -> Result<()> {
        let key = cache_key(provider, pivot, text);
        if self.entries.get(&key).is_some_and(|r| r == rewrite) {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let entry = Entry {
                key: key.clone(),
                provider: provider.into(),
                pivot: pivot.into(),
                text: text.into(),
                rewrite: rewrite.into(),
            };
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            let mut guard = self.writer.lock().expect("cache writer lock");
            if guard.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| Error::io(path, e))?;
                *guard = Some(file);
            }
            let file = guard.as_mut().expect("opened above");
            file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        self.entries.insert(key, rewrite.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_separates_fields() {
        assert_ne!(cache_key("ab", "c", "d"), cache_key("a", "bc", "d"));
        assert_eq!(cache_key("p", "de", "x").len(), 64);
    }

    #[test]
    fn entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cache.jsonl");
        let mut c = RoundTripCache::open(&path).unwrap();
        c.insert("mock-strong", "de", "hi u", "Hi you.").unwrap();
        c.insert("mock-strong", "fr", "hi u", "Hi you").unwrap();
        drop(c);
        let c = RoundTripCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("mock-strong", "de", "hi u"), Some("Hi you."));
        assert_eq!(c.get("mock-weak", "de", "hi u"), None);
    }

    #[test]
    fn truncated_tail_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut c = RoundTripCache::open(&path).unwrap();
        c.insert("p", "de", "a", "A.").unwrap();
        drop(c);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"key\":\"ab").unwrap();
        assert_eq!(RoundTripCache::open(&path).unwrap().len(), 1);
    }
}
