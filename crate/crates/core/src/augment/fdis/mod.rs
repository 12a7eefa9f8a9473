//! Formality discrimination: round-trip translation through a pivot
//! language, kept only when the discriminator sees a large enough gain in
//! formality.

mod cache;
mod provider;
mod ratelimit;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{cache_key, RoundTripCache};
pub use provider::{
    provider_by_name, HttpProvider, IdentityProvider, MockProvider, MockStrength, MtProvider, ENGLISH,
};
pub use ratelimit::TokenBucket;

use crate::discriminator::DiscriminatorModel;
use crate::error::{ensure, Error, Result};
use crate::textdata::{Corpus, FormalityScore, ParallelDataset, ParallelPair, Pivot, Sentence};

/// Gains within this distance below sigma still pass, so that decimal
/// boundaries such as 0.7 - 0.4 >= 0.3 are not lost to rounding.
pub const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdisConfig {
    pub sigma: f64,
    pub pivots: Vec<Pivot>,
    /// Texts per provider request.
    pub batch_size: usize,
    pub cache_path: Option<PathBuf>,
    /// Extra attempts after a failed request.
    pub retry_limit: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Requests per second; `None` leaves calls unthrottled.
    pub rate_limit: Option<f64>,
    pub burst: u32,
}

impl Default for FdisConfig {
    fn default() -> Self {
        FdisConfig {
            sigma: 0.6,
            pivots: vec![Pivot::Fr, Pivot::De, Pivot::Zh],
            batch_size: 32,
            cache_path: None,
            retry_limit: 3,
            retry_backoff_ms: 200,
            max_in_flight: 4,
            rate_limit: None,
            burst: 4,
        }
    }
}

impl FdisConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.sigma),
            "sigma must lie in [0, 1], got {}",
            self.sigma
        );
        ensure!(self.batch_size >= 1, "provider batch size must be at least 1");
        ensure!(self.max_in_flight >= 1, "max_in_flight must be at least 1");
        if let Some(r) = self.rate_limit {
            ensure!(r > 0.0, "rate limit must be positive, got {r}");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripOutput {
    /// (original, rewrite) in input order, failures left out.
    pub pairs: Vec<(Sentence, Sentence)>,
    pub attempted: usize,
    pub skipped: usize,
    pub provider_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripCandidate {
    pub original: Sentence,
    pub rewrite: Sentence,
    pub pivot: Pivot,
    pub p_original: FormalityScore,
    pub p_rewrite: FormalityScore,
}

impl RoundTripCandidate {
    pub fn gain(&self) -> f64 {
        self.p_rewrite.value() - self.p_original.value()
    }

    /// The acceptance rule: P+(s') - P+(s) >= sigma.
    pub fn passes(&self, sigma: f64) -> bool {
        self.gain() >= sigma - GAIN_TOLERANCE
    }
}

struct Caller<'a> {
    provider: &'a dyn MtProvider,
    config: &'a FdisConfig,
    bucket: Option<TokenBucket>,
    calls: AtomicUsize,
}

impl Caller<'_> {
    fn call(&self, texts: &[String], from: &str, to: &str) -> Result<Vec<String>> {
        let mut attempt = 0;
        loop {
            if let Some(b) = &self.bucket {
                b.acquire();
            }
            self.calls.fetch_add(1, Ordering::Relaxed);
            match self.provider.translate(texts, from, to) {
                Ok(out) if out.len() == texts.len() => return Ok(out),
                Ok(out) => {
                    return Err(Error::ProviderContract(format!(
                        "{} returned {} translations for {} texts",
                        self.provider.id(),
                        out.len(),
                        texts.len()
                    )))
                }
                Err(e @ Error::ProviderContract(_)) => return Err(e),
                Err(e) if attempt >= self.config.retry_limit => return Err(e),
                Err(e) => {
                    log::debug!("{}: attempt {} failed: {e}", self.provider.id(), attempt + 1);
                    let backoff = self.config.retry_backoff_ms.saturating_mul(1 << attempt.min(6));
                    std::thread::sleep(Duration::from_millis(backoff));
                    attempt += 1;
                }
            }
        }
    }

    /// Translates a chunk. When the whole request keeps failing, each text
    /// is retried on its own so that one bad item does not sink the rest.
    fn call_with_fallback(&self, texts: &[String], from: &str, to: &str) -> Result<Vec<Option<String>>> {
        match self.call(texts, from, to) {
            Ok(out) => Ok(out.into_iter().map(Some).collect()),
            Err(e @ Error::ProviderContract(_)) => Err(e),
            Err(e) if texts.len() == 1 => {
                log::warn!("{}: giving up on one text: {e}", self.provider.id());
                Ok(vec![None])
            }
            Err(_) => texts
                .iter()
                .map(|t| match self.call(std::slice::from_ref(t), from, to) {
                    Ok(mut out) => Ok(out.pop()),
                    Err(e @ Error::ProviderContract(_)) => Err(e),
                    Err(e) => {
                        log::warn!("{}: giving up on one text: {e}", self.provider.id());
                        Ok(None)
                    }
                })
                .collect(),
        }
    }

    fn round_trip_chunk(&self, texts: &[String], pivot: &str) -> Result<Vec<Option<String>>> {
        let there = self.call_with_fallback(texts, ENGLISH, pivot)?;
        let ok: Vec<usize> = (0..texts.len()).filter(|&i| there[i].is_some()).collect();
        let mut out = vec![None; texts.len()];
        if ok.is_empty() {
            return Ok(out);
        }
        let middle: Vec<String> = ok.iter().map(|&i| there[i].clone().expect("filtered")).collect();
        let back = self.call_with_fallback(&middle, pivot, ENGLISH)?;
        for (&i, b) in ok.iter().zip(back) {
            out[i] = b;
        }
        Ok(out)
    }
}

/// Translates every sentence to `pivot` and back. Results come from and go
/// to `cache`; only missing sentences reach the provider, in chunks of
/// `batch_size` spread over at most `max_in_flight` threads.
pub fn round_trip(
    provider: &dyn MtProvider,
    corpus: &Corpus,
    pivot: Pivot,
    config: &FdisConfig,
    cache: &mut RoundTripCache,
) -> Result<RoundTripOutput> {
    config.validate()?;
    let pivot_code = pivot.code();
    let texts: Vec<String> = corpus.sentences.iter().map(|s| s.as_str().to_string()).collect();
    let mut rewrites: Vec<Option<String>> = texts
        .iter()
        .map(|t| cache.get(provider.id(), pivot_code, t).map(str::to_string))
        .collect();
    let missing: Vec<usize> = (0..texts.len()).filter(|&i| rewrites[i].is_none()).collect();
    let chunks: Vec<&[usize]> = missing.chunks(config.batch_size).collect();
    let caller = Caller {
        provider,
        config,
        bucket: config.rate_limit.map(|r| TokenBucket::new(r, config.burst)),
        calls: AtomicUsize::new(0),
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Vec<Option<String>>>>>> =
        Mutex::new((0..chunks.len()).map(|_| None).collect());
    let workers = config.max_in_flight.min(chunks.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                if c >= chunks.len() {
                    break;
                }
                let chunk_texts: Vec<String> = chunks[c].iter().map(|&i| texts[i].clone()).collect();
                let r = caller.round_trip_chunk(&chunk_texts, pivot_code);
                let failed = r.is_err();
                results.lock().expect("results lock")[c] = Some(r);
                if failed {
                    // a contract error ends the batch; let other workers drain
                    next.store(chunks.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let results = results.into_inner().expect("results lock");
    for (chunk, r) in chunks.iter().zip(results) {
        let Some(r) = r else { continue };
        for (&i, rewrite) in chunk.iter().zip(r?) {
            if let Some(rw) = rewrite {
                cache.insert(provider.id(), pivot_code, &texts[i], &rw)?;
                rewrites[i] = Some(rw);
            }
        }
    }
    let mut pairs = Vec::with_capacity(texts.len());
    let mut skipped = 0;
    for (s, rw) in corpus.sentences.iter().zip(rewrites) {
        match rw.as_deref().map(Sentence::new) {
            Some(Ok(rewrite)) => pairs.push((s.clone(), rewrite)),
            // an empty translation counts as a failure
            _ => skipped += 1,
        }
    }
    Ok(RoundTripOutput {
        pairs,
        attempted: texts.len(),
        skipped,
        provider_calls: caller.calls.into_inner(),
    })
}

/// Scores both sides of every non-identity pair.
pub fn score_candidates(
    pairs: &[(Sentence, Sentence)],
    pivot: Pivot,
    model: &DiscriminatorModel,
) -> Result<Vec<RoundTripCandidate>> {
    pairs
        .iter()
        .filter(|(s, r)| s != r)
        .map(|(s, r)| {
            Ok(RoundTripCandidate {
                original: s.clone(),
                rewrite: r.clone(),
                pivot,
                p_original: model.score(s)?,
                p_rewrite: model.score(r)?,
            })
        })
        .collect()
}

/// Keeps the candidates whose formality gain reaches `sigma`, in order.
pub fn filter_scored(candidates: &[RoundTripCandidate], sigma: f64) -> Result<ParallelDataset> {
    ensure!((0.0..=1.0).contains(&sigma), "sigma must lie in [0, 1], got {sigma}");
    let mut pairs = Vec::new();
    for c in candidates.iter().filter(|c| c.passes(sigma)) {
        pairs.push(ParallelPair::fdis(
            c.original.clone(),
            c.rewrite.clone(),
            c.pivot,
            c.p_original,
            c.p_rewrite,
        ));
    }
    Ok(ParallelDataset::new(pairs)
        .with_meta("method", "fdis")
        .with_meta("sigma", sigma.to_string()))
}

/// Scores `pairs` with `model` and applies the threshold.
pub fn filter_by_formality(
    pairs: &[(Sentence, Sentence)],
    pivot: Pivot,
    model: &DiscriminatorModel,
    sigma: f64,
) -> Result<ParallelDataset> {
    filter_scored(&score_candidates(pairs, pivot, model)?, sigma)
}

/// Round trip plus filtering for one pivot. The dataset metadata records
/// the provider, the pivot, and how many sentences were attempted and
/// skipped.
pub fn run_fdis(
    provider: &dyn MtProvider,
    corpus: &Corpus,
    pivot: Pivot,
    model: &DiscriminatorModel,
    config: &FdisConfig,
    cache: &mut RoundTripCache,
) -> Result<(ParallelDataset, RoundTripOutput)> {
    let rt = round_trip(provider, corpus, pivot, config, cache)?;
    let ds = filter_by_formality(&rt.pairs, pivot, model, config.sigma)?
        .with_meta("provider", provider.id())
        .with_meta("pivot", pivot.code())
        .with_meta("attempted", rt.attempted.to_string())
        .with_meta("skipped", rt.skipped.to_string());
    Ok((ds, rt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRow {
    pub pivot: Pivot,
    pub kept: usize,
    pub attempted: Option<usize>,
    pub mean_gain: Option<f64>,
}

impl PivotRow {
    pub fn acceptance_ratio(&self) -> Option<f64> {
        self.attempted.filter(|&a| a > 0).map(|a| self.kept as f64 / a as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PivotReport {
    /// Sorted by pivot code.
    pub rows: Vec<PivotRow>,
}

impl PivotReport {
    pub fn from_rows(mut rows: Vec<PivotRow>) -> Self {
        rows.sort_by(|a, b| a.pivot.cmp(&b.pivot));
        PivotReport { rows }
    }

    pub fn kept(&self, pivot: Pivot) -> Option<usize> {
        self.rows.iter().find(|r| r.pivot == pivot).map(|r| r.kept)
    }

    /// A size table with one `<pivot> <kept>` line per pivot, then a detail
    /// table.
    pub fn render(&self) -> String {
        let mut out = String::from("pivot size\n");
        for r in &self.rows {
            out.push_str(&format!("{} {}\n", r.pivot, r.kept));
        }
        out.push_str("\npivot attempted acceptance mean_gain\n");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        for r in &self.rows {
            out.push_str(&format!(
                "{} {} {} {}\n",
                r.pivot,
                opt(r.attempted.map(|a| a.to_string())),
                opt(r.acceptance_ratio().map(|a| format!("{a:.4}"))),
                opt(r.mean_gain.map(|g| format!("{g:.4}"))),
            ));
        }
        out
    }
}

/// Per-pivot sizes, acceptance ratio (from the `attempted` metadata entry
/// written by [`run_fdis`]) and mean gain of the kept pairs.
pub fn pivot_report(datasets: &BTreeMap<Pivot, ParallelDataset>) -> PivotReport {
    let rows = datasets
        .iter()
        .map(|(&pivot, ds)| {
            let gains: Vec<f64> = ds
                .pairs
                .iter()
                .filter_map(|p| Some(p.target_score()?.value() - p.source_score()?.value()))
                .collect();
            PivotRow {
                pivot,
                kept: ds.len(),
                attempted: ds.metadata.get("attempted").and_then(|a| a.parse().ok()),
                mean_gain: (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64),
            }
        })
        .collect();
    PivotReport::from_rows(rows)
}

#[cfg(test)]
mod tests;
