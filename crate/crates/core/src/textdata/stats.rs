use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ParallelDataset, Pivot, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub total: usize,
    pub per_provenance: BTreeMap<Provenance, usize>,
    pub per_pivot: BTreeMap<Pivot, usize>,
    pub mean_source_len: f64,
    pub mean_target_len: f64,
}

pub fn dataset_stats(dataset: &ParallelDataset) -> StatReport {
    let mut per_provenance = BTreeMap::new();
    let mut per_pivot = BTreeMap::new();
    let (mut src_words, mut tgt_words) = (0usize, 0usize);
    for p in &dataset.pairs {
        *per_provenance.entry(p.provenance()).or_insert(0) += 1;
        if let Some(pivot) = p.pivot() {
            *per_pivot.entry(pivot).or_insert(0) += 1;
        }
        src_words += p.source.word_count();
        tgt_words += p.target.word_count();
    }
    let mean = |words: usize| {
        if dataset.is_empty() {
            0.0
        } else {
            words as f64 / dataset.len() as f64
        }
    };
    StatReport {
        total: dataset.len(),
        per_provenance,
        per_pivot,
        mean_source_len: mean(src_words),
        mean_target_len: mean(tgt_words),
    }
}

impl StatReport {
    pub fn count(&self, provenance: Provenance) -> usize {
        self.per_provenance.get(&provenance).copied().unwrap_or(0)
    }

    pub fn pivot_count(&self, pivot: Pivot) -> usize {
        self.per_pivot.get(&pivot).copied().unwrap_or(0)
    }

    /// Plain-text rendering; one `key value` line per count.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "total {}", self.total).unwrap();
        for prov in Provenance::ALL {
            writeln!(out, "provenance {} {}", prov.code(), self.count(prov)).unwrap();
        }
        for (pivot, n) in &self.per_pivot {
            writeln!(out, "{} {}", pivot.code(), n).unwrap();
        }
        writeln!(out, "mean_source_len {:.2}", self.mean_source_len).unwrap();
        writeln!(out, "mean_target_len {:.2}", self.mean_target_len).unwrap();
        out
    }
}
