//! Corpora, parallel datasets, GEC annotations and the synthetic desk-scale
//! corpus used throughout the pipeline.

mod balance;
pub mod io;
pub mod m2;
mod stats;
pub mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub use balance::{balance, BalanceMode};
pub use io::{load_corpus, CorpusFormat, Loaded};
pub use m2::{apply_edits, parse_m2, write_m2, Edit, M2Record};
pub use stats::{dataset_stats, StatReport};
pub use synthetic::{generate_synthetic_fst, SyntheticConfig, SyntheticFst};

/// A whitespace-normalized, non-empty sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sentence(String);

impl Sentence {
    pub fn new(text: &str) -> Result<Self> {
        let normalized = normalize(text);
        ensure!(!normalized.is_empty(), "sentence is empty after normalization");
        Ok(Sentence(normalized))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.split(' ')
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

/// Collapses every run of whitespace to a single space and trims the ends.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl TryFrom<String> for Sentence {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Sentence::new(&value)
    }
}

impl From<Sentence> for String {
    fn from(value: Sentence) -> Self {
        value.0
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Corpus {
            name: name.into(),
            sentences,
        }
    }

    pub fn from_strs<S: AsRef<str>>(name: &str, lines: &[S]) -> Result<Self> {
        let sentences = lines
            .iter()
            .map(|l| Sentence::new(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus::new(name, sentences))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Probability that a sentence is formal, as predicted by the discriminator.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FormalityScore(f64);

impl FormalityScore {
    pub fn new(value: f64) -> Result<Self> {
        ensure!(
            (0.0..=1.0).contains(&value),
            "formality score {value} outside [0, 1]"
        );
        Ok(FormalityScore(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FormalityScore {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        FormalityScore::new(value)
    }
}

impl From<FormalityScore> for f64 {
    fn from(value: FormalityScore) -> Self {
        value.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Bt,
    Fdis,
    Mtask,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Original,
        Provenance::Bt,
        Provenance::Fdis,
        Provenance::Mtask,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Bt => "bt",
            Provenance::Fdis => "fdis",
            Provenance::Mtask => "mtask",
        }
    }
}

/// Pivot language of a round-trip translation. The `Mock*` variants stand for
/// the offline providers of different strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pivot {
    #[serde(rename = "fr")]
    Fr,
    #[serde(rename = "de")]
    De,
    #[serde(rename = "zh")]
    Zh,
    #[serde(rename = "mock-strong")]
    MockStrong,
    #[serde(rename = "mock-medium")]
    MockMedium,
    #[serde(rename = "mock-weak")]
    MockWeak,
}

impl Pivot {
    pub const ALL: [Pivot; 6] = [
        Pivot::Fr,
        Pivot::De,
        Pivot::Zh,
        Pivot::MockStrong,
        Pivot::MockMedium,
        Pivot::MockWeak,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Pivot::Fr => "fr",
            Pivot::De => "de",
            Pivot::Zh => "zh",
            Pivot::MockStrong => "mock-strong",
            Pivot::MockMedium => "mock-medium",
            Pivot::MockWeak => "mock-weak",
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        Pivot::ALL
            .into_iter()
            .find(|p| p.code() == code)
            .ok_or_else(|| Error::Contract(format!("unknown pivot `{code}`")))
    }
}

// Pivots order by their code so reports list them alphabetically.
impl Ord for Pivot {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.code().cmp(other.code())
    }
}

impl PartialOrd for Pivot {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pivot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One line of the JSON-lines interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairRecord", into = "PairRecord")]
pub struct ParallelPair {
    pub source: Sentence,
    pub target: Sentence,
    provenance: Provenance,
    pivot: Option<Pivot>,
    source_score: Option<FormalityScore>,
    target_score: Option<FormalityScore>,
}

impl ParallelPair {
    pub fn new(source: Sentence, target: Sentence, provenance: Provenance) -> Result<Self> {
        ensure!(
            provenance != Provenance::Fdis,
            "fdis pairs need a pivot and scores; use ParallelPair::fdis"
        );
        Ok(ParallelPair {
            source,
            target,
            provenance,
            pivot: None,
            source_score: None,
            target_score: None,
        })
    }

    pub fn original(source: Sentence, target: Sentence) -> Self {
        Self::new(source, target, Provenance::Original).expect("original pair")
    }

    pub fn fdis(
        source: Sentence,
        target: Sentence,
        pivot: Pivot,
        source_score: FormalityScore,
        target_score: FormalityScore,
    ) -> Self {
        ParallelPair {
            source,
            target,
            provenance: Provenance::Fdis,
            pivot: Some(pivot),
            source_score: Some(source_score),
            target_score: Some(target_score),
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn pivot(&self) -> Option<Pivot> {
        self.pivot
    }

    pub fn source_score(&self) -> Option<FormalityScore> {
        self.source_score
    }

    pub fn target_score(&self) -> Option<FormalityScore> {
        self.target_score
    }

    /// The same pair with source and target exchanged. Scores follow their
    /// sentences.
    pub fn swapped(&self) -> Self {
        ParallelPair {
            source: self.target.clone(),
            target: self.source.clone(),
            provenance: self.provenance,
            pivot: self.pivot,
            source_score: self.target_score,
            target_score: self.source_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PairRecord {
    src: String,
    tgt: String,
    provenance: Provenance,
    #[serde(default)]
    pivot: Option<Pivot>,
    #[serde(default)]
    p_src: Option<f64>,
    #[serde(default)]
    p_tgt: Option<f64>,
}

impl TryFrom<PairRecord> for ParallelPair {
    type Error = Error;

    fn try_from(r: PairRecord) -> Result<Self> {
        let source = Sentence::new(&r.src)?;
        let target = Sentence::new(&r.tgt)?;
        if r.provenance == Provenance::Fdis {
            match (r.pivot, r.p_src, r.p_tgt) {
                (Some(pivot), Some(ps), Some(pt)) => Ok(ParallelPair::fdis(
                    source,
                    target,
                    pivot,
                    FormalityScore::new(ps)?,
                    FormalityScore::new(pt)?,
                )),
                _ => Err(Error::Contract(
                    "fdis pair requires pivot, p_src and p_tgt".into(),
                )),
            }
        } else {
            ensure!(
                r.pivot.is_none() && r.p_src.is_none() && r.p_tgt.is_none(),
                "only fdis pairs may carry pivot or scores"
            );
            ParallelPair::new(source, target, r.provenance)
        }
    }
}

impl From<ParallelPair> for PairRecord {
    fn from(p: ParallelPair) -> Self {
        PairRecord {
            src: p.source.into(),
            tgt: p.target.into(),
            provenance: p.provenance,
            pivot: p.pivot,
            p_src: p.source_score.map(f64::from),
            p_tgt: p.target_score.map(f64::from),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelDataset {
    pub pairs: Vec<ParallelPair>,
    pub metadata: BTreeMap<String, String>,
}

impl ParallelDataset {
    pub fn new(pairs: Vec<ParallelPair>) -> Self {
        ParallelDataset {
            pairs,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Concatenates datasets in order. Metadata keys of later datasets are
    /// prefixed with their position.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a ParallelDataset>) -> Self {
        let mut out = ParallelDataset::default();
        for (i, part) in parts.into_iter().enumerate() {
            out.pairs.extend(part.pairs.iter().cloned());
            for (k, v) in &part.metadata {
                out.metadata.insert(format!("{i}.{k}"), v.clone());
            }
        }
        out
    }

    /// Drops repeated (source, target) pairs, keeping the first occurrence.
    pub fn dedup(&mut self) {
        let mut seen = HashSet::new();
        self.pairs
            .retain(|p| seen.insert((p.source.clone(), p.target.clone())));
    }

    pub fn sources(&self) -> Corpus {
        Corpus::new(
            "sources",
            self.pairs.iter().map(|p| p.source.clone()).collect(),
        )
    }

    pub fn targets(&self) -> Corpus {
        Corpus::new(
            "targets",
            self.pairs.iter().map(|p| p.target.clone()).collect(),
        )
    }
}

/// Test set whose items each carry four reference rewrites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRefTestSet {
    items: Vec<MultiRefItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRefItem {
    pub source: Sentence,
    pub references: Vec<Sentence>,
}

pub const REFERENCES_PER_ITEM: usize = 4;

impl MultiRefTestSet {
    pub fn new(items: Vec<MultiRefItem>) -> Result<Self> {
        for (i, item) in items.iter().enumerate() {
            ensure!(
                item.references.len() == REFERENCES_PER_ITEM,
                "item {i} has {} references, expected {REFERENCES_PER_ITEM}",
                item.references.len()
            );
        }
        Ok(MultiRefTestSet { items })
    }

    pub fn items(&self) -> &[MultiRefItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sources(&self) -> Vec<Sentence> {
        self.items.iter().map(|i| i.source.clone()).collect()
    }

    pub fn references(&self) -> Vec<Vec<Sentence>> {
        self.items.iter().map(|i| i.references.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        Sentence::new(text).unwrap()
    }

    #[test]
    fn normalization_collapses_whitespace_and_is_idempotent() {
        let once = s("  hello \t  world\r\n ");
        assert_eq!(once.as_str(), "hello world");
        assert_eq!(s(once.as_str()), once);
        assert!(Sentence::new(" \n\t ").is_err());
    }

    #[test]
    fn fdis_pairs_require_pivot_and_scores() {
        let line = r#"{"src":"a","tgt":"B.","provenance":"fdis","pivot":"de"}"#;
        assert!(serde_json::from_str::<ParallelPair>(line).is_err());
        let line = r#"{"src":"a","tgt":"B.","provenance":"bt","pivot":"de"}"#;
        assert!(serde_json::from_str::<ParallelPair>(line).is_err());
        let line =
            r#"{"src":"a","tgt":"B.","provenance":"fdis","pivot":"mock-weak","p_src":0.1,"p_tgt":0.9}"#;
        let pair: ParallelPair = serde_json::from_str(line).unwrap();
        assert_eq!(pair.pivot(), Some(Pivot::MockWeak));
        assert_eq!(pair.target_score().unwrap().value(), 0.9);
    }

    #[test]
    fn pair_json_uses_interchange_field_names() {
        let pair = ParallelPair::original(s("hi u"), s("Hi you."));
        let json = serde_json::to_string(&pair).unwrap();
        assert_eq!(
            json,
            r#"{"src":"hi u","tgt":"Hi you.","provenance":"original","pivot":null,"p_src":null,"p_tgt":null}"#
        );
    }

    #[test]
    fn pivots_sort_by_code() {
        let mut pivots = Pivot::ALL.to_vec();
        pivots.sort();
        let codes: Vec<_> = pivots.iter().map(|p| p.code()).collect();
        assert_eq!(
            codes,
            ["de", "fr", "mock-medium", "mock-strong", "mock-weak", "zh"]
        );
    }

    #[test]
    fn multiref_requires_four_references() {
        let item = MultiRefItem {
            source: s("x"),
            references: vec![s("X.")],
        };
        assert!(MultiRefTestSet::new(vec![item]).is_err());
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let a = ParallelPair::original(s("a"), s("A."));
        let b = ParallelPair::original(s("b"), s("B."));
        let mut ds = ParallelDataset::new(vec![a.clone(), b.clone(), a.clone()]);
        ds.dedup();
        assert_eq!(ds.pairs, vec![a, b]);
    }
}
