use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;

fn corpus(lines: &[&str]) -> Corpus {
    Corpus::from_strs("test", lines).unwrap()
}

fn s(t: &str) -> Sentence {
    Sentence::new(t).unwrap()
}

fn quick() -> FdisConfig {
    FdisConfig {
        retry_backoff_ms: 0,
        batch_size: 2,
        max_in_flight: 2,
        ..FdisConfig::default()
    }
}

/// Uppercases, fails every request that contains `poison`, and counts calls.
struct Flaky {
    poison: &'static str,
    calls: AtomicUsize,
}

impl MtProvider for Flaky {
    fn id(&self) -> &str {
        "flaky"
    }

    fn translate(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if texts.iter().any(|t| t.contains(self.poison)) {
            return Err(Error::Transport("boom".into()));
        }
        Ok(texts.iter().map(|t| t.to_uppercase()).collect())
    }
}

struct Short;

impl MtProvider for Short {
    fn id(&self) -> &str {
        "short"
    }

    fn translate(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>> {
        Ok(texts.iter().skip(1).cloned().collect())
    }
}

#[test]
fn identity_provider_round_trips_unchanged() {
    let c = corpus(&["hi u", "plz go"]);
    let out = round_trip(&IdentityProvider, &c, Pivot::De, &quick(), &mut RoundTripCache::in_memory()).unwrap();
    assert!(out.pairs.iter().all(|(a, b)| a == b));
    assert_eq!(out.pairs.len(), 2);
}

#[test]
fn strong_mock_restores_formal_text() {
    let c = corpus(&["plz send the report 2 me"]);
    let p = MockProvider::new(MockStrength::Strong);
    let out = round_trip(&p, &c, Pivot::MockStrong, &quick(), &mut RoundTripCache::in_memory()).unwrap();
    assert_eq!(out.pairs[0].1.as_str(), "Please send the report to me.");
}

#[test]
fn permanent_failure_skips_only_that_item() {
    let p = Flaky {
        poison: "two",
        calls: AtomicUsize::new(0),
    };
    let c = corpus(&["one", "two", "three"]);
    let cfg = FdisConfig {
        retry_limit: 1,
        ..quick()
    };
    let out = round_trip(&p, &c, Pivot::Fr, &cfg, &mut RoundTripCache::in_memory()).unwrap();
    assert_eq!(out.skipped, 1);
    let originals: Vec<&str> = out.pairs.iter().map(|(o, _)| o.as_str()).collect();
    assert_eq!(originals, ["one", "three"]);
    assert_eq!(out.pairs[1].1.as_str(), "THREE");
}

#[test]
fn wrong_arity_aborts() {
    let c = corpus(&["a b", "c d", "e f"]);
    let err = round_trip(&Short, &c, Pivot::Fr, &quick(), &mut RoundTripCache::in_memory()).unwrap_err();
    assert!(matches!(err, Error::ProviderContract(_)), "{err}");
}

#[test]
fn cached_rerun_makes_no_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.jsonl");
    let p = Flaky {
        poison: "\u{1}",
        calls: AtomicUsize::new(0),
    };
    let c = corpus(&["x y", "z w", "q r", "x y"]);
    let first = round_trip(&p, &c, Pivot::Zh, &quick(), &mut RoundTripCache::open(&path).unwrap()).unwrap();
    assert!(first.provider_calls > 0);
    let before = p.calls.load(Ordering::Relaxed);
    let second = round_trip(&p, &c, Pivot::Zh, &quick(), &mut RoundTripCache::open(&path).unwrap()).unwrap();
    assert_eq!(second.provider_calls, 0);
    assert_eq!(p.calls.load(Ordering::Relaxed), before);
    assert_eq!(first.pairs, second.pairs);
}

#[test]
fn rate_limit_and_concurrency_keep_order() {
    let lines: Vec<String> = (0..40).map(|i| format!("line {i}")).collect();
    let c = Corpus::from_strs("t", &lines).unwrap();
    let cfg = FdisConfig {
        rate_limit: Some(1000.0),
        max_in_flight: 3,
        batch_size: 3,
        ..quick()
    };
    let p = Flaky {
        poison: "\u{1}",
        calls: AtomicUsize::new(0),
    };
    let out = round_trip(&p, &c, Pivot::De, &cfg, &mut RoundTripCache::in_memory()).unwrap();
    for (i, (o, r)) in out.pairs.iter().enumerate() {
        assert_eq!(o.as_str(), format!("line {i}"));
        assert_eq!(r.as_str(), format!("LINE {i}"));
    }
}

fn candidate(p: f64, q: f64) -> RoundTripCandidate {
    RoundTripCandidate {
        original: s("a"),
        rewrite: s("A."),
        pivot: Pivot::De,
        p_original: FormalityScore::new(p).unwrap(),
        p_rewrite: FormalityScore::new(q).unwrap(),
    }
}

#[test]
fn threshold_is_inclusive() {
    let kept = |p, q| filter_scored(&[candidate(p, q)], 0.6).unwrap().len();
    assert_eq!(kept(0.10, 0.92), 1);
    assert_eq!(kept(0.40, 0.90), 0);
    assert_eq!(kept(0.30, 0.90), 1);
    assert_eq!(kept(0.0, 0.6), 1);
}

#[test]
fn kept_pairs_carry_pivot_and_scores() {
    let ds = filter_scored(&[candidate(0.1, 0.95)], 0.6).unwrap();
    let p = &ds.pairs[0];
    assert_eq!(p.pivot(), Some(Pivot::De));
    assert_eq!(p.source_score().unwrap().value(), 0.1);
    assert_eq!(p.target_score().unwrap().value(), 0.95);
}

#[test]
fn report_renders_sizes() {
    let rows = [(Pivot::Fr, 300000), (Pivot::De, 530000), (Pivot::Zh, 680000)]
        .into_iter()
        .map(|(pivot, kept)| PivotRow {
            pivot,
            kept,
            attempted: None,
            mean_gain: None,
        })
        .collect();
    let text = PivotReport::from_rows(rows).render();
    let lines: Vec<&str> = text.lines().collect();
    for want in ["fr 300000", "de 530000", "zh 680000"] {
        assert!(lines.contains(&want), "{text}");
    }
    assert!(pivot_report(&BTreeMap::new()).rows.is_empty());
}

#[test]
fn report_uses_attempted_metadata() {
    let ds = filter_scored(&[candidate(0.1, 0.9), candidate(0.2, 0.9)], 0.6)
        .unwrap()
        .with_meta("attempted", "8");
    let r = pivot_report(&BTreeMap::from([(Pivot::De, ds)]));
    assert_eq!(r.rows[0].acceptance_ratio(), Some(0.25));
    assert!((r.rows[0].mean_gain.unwrap() - 0.75).abs() < 1e-12);
}

mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn filter_is_monotone_in_sigma(
            scores in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..40),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cands: Vec<_> = scores.iter().map(|&(p, q)| candidate(p, q)).collect();
            let keep = |sigma| -> Vec<bool> { cands.iter().map(|c| c.passes(sigma)).collect() };
            let (k_lo, k_hi) = (keep(lo), keep(hi));
            for (l, h) in k_lo.iter().zip(&k_hi) {
                prop_assert!(!*h || *l);
            }
            let zero = filter_scored(&cands, 0.0).unwrap().len();
            prop_assert_eq!(zero, cands.iter().filter(|c| c.gain() >= -GAIN_TOLERANCE).count());
        }
    }
}
