//! Human evaluation: anonymized item batches, ratings, and aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{paired_bootstrap, pearson};
use crate::error::{ensure, Error, Result};
use crate::textdata::{io, Sentence};

pub const SYSTEMS_PER_ITEM: usize = 4;
pub const MAX_RATING: u8 = 2;
pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplayedOutput {
    pub display_index: usize,
    pub text: Sentence,
}

/// What an annotator sees. Carries no system identifiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanEvalItem {
    pub id: usize,
    pub source: Sentence,
    pub outputs: Vec<DisplayedOutput>,
}

/// Maps each item's display positions back to systems. Kept in its own
/// file, away from annotators.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenKey {
    /// Item id to system ids by display index.
    pub systems: BTreeMap<usize, Vec<String>>,
    /// Item id to the position of its source in the test inputs.
    pub input_index: BTreeMap<usize, usize>,
}

impl HiddenKey {
    pub fn system(&self, item: usize, display_index: usize) -> Option<&str> {
        self.systems.get(&item)?.get(display_index).map(String::as_str)
    }

    pub fn system_ids(&self) -> BTreeSet<&str> {
        self.systems.values().flatten().map(String::as_str).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&io::read_text(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanEvalBatch {
    pub items: Vec<HumanEvalItem>,
    pub key: HiddenKey,
}

pub fn save_items(path: impl AsRef<Path>, items: &[HumanEvalItem]) -> Result<()> {
    io::write_atomic(path, serde_json::to_string_pretty(items)?.as_bytes())
}

pub fn load_items(path: impl AsRef<Path>) -> Result<Vec<HumanEvalItem>> {
    let items: Vec<HumanEvalItem> = serde_json::from_str(&io::read_text(path)?)?;
    let mut ids = BTreeSet::new();
    for item in &items {
        ensure!(ids.insert(item.id), "item id {} appears twice", item.id);
        let mut shown: Vec<usize> = item.outputs.iter().map(|o| o.display_index).collect();
        shown.sort_unstable();
        ensure!(
            shown == (0..SYSTEMS_PER_ITEM).collect::<Vec<_>>(),
            "item {} must show display indices 0..{SYSTEMS_PER_ITEM} once each",
            item.id
        );
    }
    Ok(items)
}

/// Samples `n` inputs without replacement and shows each with the four
/// systems' outputs in an independently shuffled order. Items are numbered
/// from 0 in input order.
pub fn build_humaneval_batch(
    test_inputs: &[Sentence],
    system_outputs: &BTreeMap<String, Vec<Sentence>>,
    n: usize,
    seed: u64,
) -> Result<HumanEvalBatch> {
    ensure!(
        system_outputs.len() == SYSTEMS_PER_ITEM,
        "human evaluation compares exactly {SYSTEMS_PER_ITEM} systems, got {}",
        system_outputs.len()
    );
    for (id, outs) in system_outputs {
        ensure!(
            outs.len() == test_inputs.len(),
            "system {id} has {} outputs for {} inputs",
            outs.len(),
            test_inputs.len()
        );
    }
    ensure!(
        n <= test_inputs.len(),
        "cannot sample {n} items from {} inputs",
        test_inputs.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, test_inputs.len(), n).into_vec();
    picked.sort_unstable();
    let systems: Vec<&String> = system_outputs.keys().collect();
    let mut items = Vec::with_capacity(n);
    let mut key = HiddenKey::default();
    for (id, &input) in picked.iter().enumerate() {
        let mut item_rng = ChaCha8Rng::seed_from_u64(seed);
        item_rng.set_stream(id as u64 + 1);
        let mut order: Vec<usize> = (0..SYSTEMS_PER_ITEM).collect();
        order.shuffle(&mut item_rng);
        items.push(HumanEvalItem {
            id,
            source: test_inputs[input].clone(),
            outputs: order
                .iter()
                .enumerate()
                .map(|(display_index, &s)| DisplayedOutput {
                    display_index,
                    text: system_outputs[systems[s]][input].clone(),
                })
                .collect(),
        });
        key.systems
            .insert(id, order.iter().map(|&s| systems[s].clone()).collect());
        key.input_index.insert(id, input);
    }
    Ok(HumanEvalBatch { items, key })
}

/// One annotator's judgment of one displayed output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingRecord {
    pub annotator: String,
    pub item: usize,
    pub display_index: usize,
    pub formality: u8,
    pub fluency: u8,
    pub meaning: u8,
}

impl RatingRecord {
    /// Field-level problems, empty when the record is valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.annotator.trim().is_empty() {
            out.push("annotator: must not be empty".to_string());
        }
        if self.display_index >= SYSTEMS_PER_ITEM {
            out.push(format!(
                "display_index: {} is not in 0..{SYSTEMS_PER_ITEM}",
                self.display_index
            ));
        }
        for (name, v) in [
            ("formality", self.formality),
            ("fluency", self.fluency),
            ("meaning", self.meaning),
        ] {
            if v > MAX_RATING {
                out.push(format!("{name}: {v} is not in 0..={MAX_RATING}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        ensure!(problems.is_empty(), "invalid rating: {}", problems.join("; "));
        Ok(())
    }

    pub fn score(&self, c: Criterion) -> u8 {
        match c {
            Criterion::Formality => self.formality,
            Criterion::Fluency => self.fluency,
            Criterion::Meaning => self.meaning,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Formality,
    Fluency,
    Meaning,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Formality, Criterion::Fluency, Criterion::Meaning];
}

/// A correlation, or the reason it does not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    Value(f64),
    Undefined(String),
}

impl Correlation {
    pub fn value(&self) -> Option<f64> {
        match self {
            Correlation::Value(v) => Some(*v),
            Correlation::Undefined(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub annotators: [String; 2],
    pub pearson_formality: Correlation,
    pub pearson_fluency: Correlation,
    pub pearson_meaning: Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScores {
    pub system: String,
    pub formality: f64,
    pub fluency: f64,
    pub meaning: f64,
    /// Bootstrap p-values against the baseline, per criterion.
    pub p_formality: f64,
    pub p_fluency: f64,
    pub p_meaning: f64,
}

impl SystemScores {
    pub fn mean(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Formality => self.formality,
            Criterion::Fluency => self.fluency,
            Criterion::Meaning => self.meaning,
        }
    }

    pub fn p_value(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Formality => self.p_formality,
            Criterion::Fluency => self.p_fluency,
            Criterion::Meaning => self.p_meaning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalReport {
    pub baseline: String,
    pub systems: Vec<SystemScores>,
    /// Present when exactly two annotators rated.
    pub agreement: Option<AgreementReport>,
}

impl HumanEvalReport {
    pub fn system(&self, id: &str) -> Option<&SystemScores> {
        self.systems.iter().find(|s| s.system == id)
    }

    /// Means with two decimals, one system per row, then p-values against
    /// the baseline; `*` marks p < 0.05.
    pub fn render(&self) -> String {
        let width = self.systems.iter().map(|s| s.system.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:width$} formality fluency meaning\n", "system");
        for s in &self.systems {
            out.push_str(&format!(
                "{:width$} {:.2} {:.2} {:.2}\n",
                s.system, s.formality, s.fluency, s.meaning
            ));
        }
        out.push_str(&format!("\np-values against {}\n", self.baseline));
        for s in self.systems.iter().filter(|s| s.system != self.baseline) {
            let cells: Vec<String> = Criterion::ALL
                .iter()
                .map(|&c| {
                    let p = s.p_value(c);
                    format!("{p:.4}{}", if p < ALPHA { "*" } else { "" })
                })
                .collect();
            out.push_str(&format!("{:width$} {}\n", s.system, cells.join(" ")));
        }
        if let Some(a) = &self.agreement {
            let fmt = |c: &Correlation| match c {
                Correlation::Value(v) => format!("{v:.2}"),
                Correlation::Undefined(_) => "undefined".into(),
            };
            out.push_str(&format!(
                "\nagreement ({} vs {}): formality {} fluency {} meaning {}\n",
                a.annotators[0],
                a.annotators[1],
                fmt(&a.pearson_formality),
                fmt(&a.pearson_fluency),
                fmt(&a.pearson_meaning)
            ));
        }
        out
    }
}

/// Per-system means, bootstrap significance against `baseline` and, for
/// two annotators, their Pearson agreement over shared outputs.
pub fn aggregate_ratings(
    records: &[RatingRecord],
    key: &HiddenKey,
    baseline: &str,
    resamples: usize,
    seed: u64,
) -> Result<HumanEvalReport> {
    ensure!(!records.is_empty(), "no ratings to aggregate");
    let mut resolved: Vec<(&RatingRecord, &str)> = Vec::with_capacity(records.len());
    for r in records {
        r.validate()?;
        let system = key.system(r.item, r.display_index).ok_or_else(|| {
            Error::Contract(format!(
                "rating by {} for item {} display {} does not resolve to a system",
                r.annotator, r.item, r.display_index
            ))
        })?;
        resolved.push((r, system));
    }
    let systems: BTreeSet<&str> = resolved.iter().map(|(_, s)| *s).collect();
    ensure!(systems.contains(baseline), "baseline {baseline} has no ratings");

    // (system, item) -> per criterion (sum, count), for paired item means
    let mut per_item: BTreeMap<(&str, usize), [(f64, usize); 3]> = BTreeMap::new();
    for (r, s) in &resolved {
        let cell = per_item.entry((s, r.item)).or_insert([(0.0, 0); 3]);
        for (k, c) in Criterion::ALL.iter().enumerate() {
            cell[k].0 += f64::from(r.score(*c));
            cell[k].1 += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &system in &systems {
        let mine: Vec<_> = resolved.iter().filter(|(_, s)| *s == system).collect();
        let mean = |c: Criterion| mine.iter().map(|(r, _)| f64::from(r.score(c))).sum::<f64>() / mine.len() as f64;
        let mut p = [1.0; 3];
        if system != baseline {
            for (k, slot) in p.iter_mut().enumerate() {
                let diffs: Vec<f64> = per_item
                    .iter()
                    .filter(|((s, _), _)| *s == system)
                    .filter_map(|((_, item), v)| {
                        let b = per_item.get(&(baseline, *item))?;
                        Some(v[k].0 / v[k].1 as f64 - b[k].0 / b[k].1 as f64)
                    })
                    .collect();
                ensure!(
                    !diffs.is_empty(),
                    "system {system} shares no rated item with baseline {baseline}"
                );
                *slot = paired_bootstrap(&diffs, resamples, &mut rng)?;
            }
        }
        out.push(SystemScores {
            system: system.to_string(),
            formality: mean(Criterion::Formality),
            fluency: mean(Criterion::Fluency),
            meaning: mean(Criterion::Meaning),
            p_formality: p[0],
            p_fluency: p[1],
            p_meaning: p[2],
        });
    }

    let annotators: BTreeSet<&str> = records.iter().map(|r| r.annotator.as_str()).collect();
    let agreement = if annotators.len() == 2 {
        let names: Vec<&str> = annotators.into_iter().collect();
        Some(agreement(records, [names[0], names[1]]))
    } else {
        None
    };
    Ok(HumanEvalReport {
        baseline: baseline.to_string(),
        systems: out,
        agreement,
    })
}

/// Pearson per criterion over the outputs both annotators rated, paired by
/// (item, display index).
fn agreement(records: &[RatingRecord], names: [&str; 2]) -> AgreementReport {
    let by = |name: &str| -> BTreeMap<(usize, usize), &RatingRecord> {
        records
            .iter()
            .filter(|r| r.annotator == name)
            .map(|r| ((r.item, r.display_index), r))
            .collect()
    };
    let (a, b) = (by(names[0]), by(names[1]));
    let shared: Vec<(&RatingRecord, &RatingRecord)> =
        a.iter().filter_map(|(k, ra)| Some((*ra, *b.get(k)?))).collect();
    let corr = |c: Criterion| {
        let x: Vec<f64> = shared.iter().map(|(r, _)| f64::from(r.score(c))).collect();
        let y: Vec<f64> = shared.iter().map(|(_, r)| f64::from(r.score(c))).collect();
        match pearson(&x, &y) {
            Ok(v) => Correlation::Value(v),
            Err(e) => Correlation::Undefined(e.to_string()),
        }
    };
    AgreementReport {
        annotators: [names[0].to_string(), names[1].to_string()],
        pearson_formality: corr(Criterion::Formality),
        pearson_fluency: corr(Criterion::Fluency),
        pearson_meaning: corr(Criterion::Meaning),
    }
}
