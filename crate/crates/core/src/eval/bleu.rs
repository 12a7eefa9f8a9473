//! Corpus-level multi-reference BLEU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::textdata::Sentence;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// 0 to 100.
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    pub fn render(&self) -> String {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", 100.0 * p)).collect();
        format!(
            "BLEU = {:.2} {} (BP = {:.3}, hyp_len = {}, ref_len = {})",
            self.score,
            p.join("/"),
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

/// Whitespace tokens with every punctuation character split off as its own
/// token. Case is kept.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for c in word.chars() {
            if c.is_alphanumeric() {
                cur.push(c);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `hyp_len`, the shorter one on ties.
pub fn closest_ref_len(hyp_len: usize, ref_lens: &[usize]) -> usize {
    let mut best = ref_lens[0];
    for &r in &ref_lens[1..] {
        let (d, bd) = (r.abs_diff(hyp_len), best.abs_diff(hyp_len));
        if d < bd || (d == bd && r < best) {
            best = r;
        }
    }
    best
}

/// Clipped n-gram matches, n-gram totals, hypothesis and effective
/// reference length of one segment.
struct SegmentStats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    hyp_len: usize,
    ref_len: usize,
}

fn segment_stats(hyp: &Sentence, refs: &[Sentence]) -> SegmentStats {
    let h = tokenize(hyp.as_str());
    let r: Vec<Vec<String>> = refs.iter().map(|s| tokenize(s.as_str())).collect();
    let mut stats = SegmentStats {
        matches: [0; MAX_ORDER],
        totals: [0; MAX_ORDER],
        hyp_len: h.len(),
        ref_len: closest_ref_len(h.len(), &r.iter().map(Vec::len).collect::<Vec<_>>()),
    };
    for n in 1..=MAX_ORDER {
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for rt in &r {
            for (g, c) in ngram_counts(rt, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        for (g, c) in ngram_counts(&h, n) {
            stats.matches[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
            stats.totals[n - 1] += c;
        }
    }
    stats
}

/// Corpus BLEU with clipped counts against the per-n-gram maximum over
/// each item's references, brevity penalty against the closest reference
/// length, and no smoothing.
pub fn corpus_bleu(hyps: &[Sentence], refs: &[Vec<Sentence>]) -> Result<BleuReport> {
    ensure!(
        hyps.len() == refs.len(),
        "bleu: {} hypotheses but {} reference sets",
        hyps.len(),
        refs.len()
    );
    ensure!(!hyps.is_empty(), "bleu: empty corpus");
    ensure!(
        refs.iter().all(|r| !r.is_empty()),
        "bleu: every item needs at least one reference"
    );
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let s = segment_stats(h, r);
        for n in 0..MAX_ORDER {
            matches[n] += s.matches[n];
            totals[n] += s.totals[n];
        }
        hyp_len += s.hyp_len;
        ref_len += s.ref_len;
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let score = if precisions.iter().all(|&p| p > 0.0) {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    } else {
        0.0
    };
    Ok(BleuReport {
        score,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        Sentence::new(text).unwrap()
    }

    #[test]
    fn punctuation_is_split_and_case_kept() {
        assert_eq!(tokenize("Hello, World."), ["Hello", ",", "World", "."]);
        assert_eq!(tokenize("don't"), ["don", "'", "t"]);
    }

    #[test]
    fn perfect_match_scores_100() {
        let hyps = [s("Please send the report to me."), s("Thank you very much!")];
        let refs = vec![
            vec![s("Send it."), s("Please send the report to me.")],
            vec![s("Thank you very much!")],
        ];
        let r = corpus_bleu(&hyps, &refs).unwrap();
        assert_eq!(r.score, 100.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn no_overlap_scores_zero() {
        let r = corpus_bleu(&[s("aa bb cc dd")], &[vec![s("ee ff gg hh")]]).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.precisions[0], 0.0);
    }

    #[test]
    fn closest_length_prefers_shorter_on_ties() {
        assert_eq!(closest_ref_len(5, &[7, 3]), 3);
        assert_eq!(closest_ref_len(5, &[6, 9]), 6);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(corpus_bleu(&[s("a")], &[]).is_err());
    }

    #[test]
    fn brevity_penalty_applies() {
        let r = corpus_bleu(&[s("a b c d")], &[vec![s("a b c d e f g h")]]).unwrap();
        assert!((r.brevity_penalty - (-1.0f64).exp()).abs() < 1e-12);
        assert!((r.score - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }
}
