//! Greedy, beam and ensemble decoding.
//!
//! Every hypothesis ends in eos: at `max_len` content tokens eos is forced,
//! so all hypotheses are scored the same way (mean log-probability per
//! token, eos included).

use serde::{Deserialize, Serialize};

use super::{EncodedSource, Seq2SeqModel, Seq2SeqNet};
use crate::error::{ensure, Result};
use crate::textdata::Sentence;
use crate::tokenizer::{BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Beam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub beam_width: usize,
    /// Cap on generated tokens, eos excluded.
    pub max_len: usize,
    /// Kept for configuration symmetry; decoding itself is deterministic.
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig::beam(4, 64)
    }
}

impl DecodeConfig {
    pub fn greedy(max_len: usize) -> Self {
        DecodeConfig {
            mode: DecodeMode::Greedy,
            beam_width: 1,
            max_len,
            seed: 0,
        }
    }

    pub fn beam(beam_width: usize, max_len: usize) -> Self {
        DecodeConfig {
            mode: DecodeMode::Beam,
            beam_width,
            max_len,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.beam_width >= 1, "beam width must be at least 1");
        ensure!(self.max_len >= 1, "max_len must be at least 1");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Content tokens; the terminating eos is implicit.
    pub tokens: Vec<u32>,
    /// Sum of log-probabilities, eos included.
    pub log_prob: f64,
}

impl Hypothesis {
    /// Mean log-probability per token, eos included.
    pub fn score(&self) -> f64 {
        self.log_prob / (self.tokens.len() + 1) as f64
    }
}

/// Models decoded together plus their encodings of one source.
struct Ensemble<'a> {
    members: Vec<(&'a Seq2SeqNet, EncodedSource)>,
}

type States = Vec<Vec<f64>>;

impl<'a> Ensemble<'a> {
    fn new(nets: &[&'a Seq2SeqNet], source: &[u32]) -> Result<Self> {
        let members = nets
            .iter()
            .map(|n| Ok((*n, n.encode_source(source)?)))
            .collect::<Result<_>>()?;
        Ok(Ensemble { members })
    }

    fn initial(&self) -> States {
        self.members.iter().map(|(_, s)| s.final_state.clone()).collect()
    }

    /// Arithmetic mean of the members' next-token distributions.
    fn step(&self, states: &States, prev: u32) -> Result<(Vec<f64>, States)> {
        let mut avg: Vec<f64> = Vec::new();
        let mut next = Vec::with_capacity(states.len());
        for ((net, src), state) in self.members.iter().zip(states) {
            let (p, s) = net.step(src, state, prev)?;
            if avg.is_empty() {
                avg = p;
            } else {
                avg.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
            }
            next.push(s);
        }
        let k = self.members.len() as f64;
        avg.iter_mut().for_each(|a| *a /= k);
        Ok((avg, next))
    }
}

fn ln(p: f64) -> f64 {
    p.max(f64::MIN_POSITIVE).ln()
}

fn argmax(p: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best as u32
}

fn greedy(ens: &Ensemble, max_len: usize) -> Result<Hypothesis> {
    let mut states = ens.initial();
    let mut prev = BOS;
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
    };
    loop {
        let (p, next) = ens.step(&states, prev)?;
        let tok = if hyp.tokens.len() == max_len { EOS } else { argmax(&p) };
        hyp.log_prob += ln(p[tok as usize]);
        if tok == EOS {
            return Ok(hyp);
        }
        hyp.tokens.push(tok);
        states = next;
        prev = tok;
    }
}

struct Live {
    hyp: Hypothesis,
    states: States,
}

fn beam(ens: &Ensemble, width: usize, max_len: usize) -> Result<Hypothesis> {
    let mut live = vec![Live {
        hyp: Hypothesis {
            tokens: Vec::new(),
            log_prob: 0.0,
        },
        states: ens.initial(),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    while !live.is_empty() {
        // (parent, token, cumulative log-prob)
        let mut candidates: Vec<(usize, u32, f64)> = Vec::new();
        let mut expanded = Vec::with_capacity(live.len());
        for (i, l) in live.iter().enumerate() {
            let prev = l.hyp.tokens.last().copied().unwrap_or(BOS);
            let (p, next) = ens.step(&l.states, prev)?;
            if l.hyp.tokens.len() == max_len {
                candidates.push((i, EOS, l.hyp.log_prob + ln(p[EOS as usize])));
            } else {
                let mut ids: Vec<u32> = (0..p.len() as u32).collect();
                ids.sort_by(|a, b| p[*b as usize].total_cmp(&p[*a as usize]).then(a.cmp(b)));
                for &t in ids.iter().take(width) {
                    candidates.push((i, t, l.hyp.log_prob + ln(p[t as usize])));
                }
            }
            expanded.push(next);
        }
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        candidates.truncate(live.len().min(width));
        let mut survivors = Vec::new();
        for (parent, tok, log_prob) in candidates {
            let mut tokens = live[parent].hyp.tokens.clone();
            if tok == EOS {
                finished.push(Hypothesis { tokens, log_prob });
            } else {
                tokens.push(tok);
                survivors.push(Live {
                    hyp: Hypothesis { tokens, log_prob },
                    states: expanded[parent].clone(),
                });
            }
        }
        live = survivors;
    }
    let mut best = finished.swap_remove(0);
    for h in finished {
        if h.score() > best.score() {
            best = h;
        }
    }
    Ok(best)
}

/// Search over the averaged distribution of `nets`. Beam search also
/// considers the greedy hypothesis, so its result never scores below it.
pub fn search(nets: &[&Seq2SeqNet], source: &[u32], config: &DecodeConfig) -> Result<Hypothesis> {
    config.validate()?;
    ensure!(!nets.is_empty(), "decoding needs at least one model");
    let ens = Ensemble::new(nets, source)?;
    let g = greedy(&ens, config.max_len)?;
    if config.mode == DecodeMode::Greedy || config.beam_width == 1 {
        return Ok(g);
    }
    let b = beam(&ens, config.beam_width, config.max_len)?;
    Ok(if g.score() > b.score() { g } else { b })
}

pub fn decode(model: &Seq2SeqModel, source: &Sentence, config: &DecodeConfig) -> Result<Sentence> {
    ensemble_decode(&[model], source, config)
}

/// Decodes with the per-step mean of the models' token distributions.
pub fn ensemble_decode(models: &[&Seq2SeqModel], source: &Sentence, config: &DecodeConfig) -> Result<Sentence> {
    ensure!(!models.is_empty(), "decoding needs at least one model");
    let first = models[0];
    for m in &models[1..] {
        ensure!(
            m.bpe == first.bpe && m.net.vocab() == first.net.vocab(),
            "ensemble members must share one vocabulary"
        );
    }
    let ids = first.bpe.encode(source).0;
    let nets: Vec<&Seq2SeqNet> = models.iter().map(|m| &m.net).collect();
    let hyp = search(&nets, &ids, config)?;
    first.detokenize(&hyp.tokens)
}

pub fn decode_batch(models: &[&Seq2SeqModel], sources: &[Sentence], config: &DecodeConfig) -> Result<Vec<Sentence>> {
    sources.iter().map(|s| ensemble_decode(models, s, config)).collect()
}
