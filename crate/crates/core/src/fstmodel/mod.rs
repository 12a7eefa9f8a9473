//! GRU encoder-decoder with additive attention over a shared BPE vocabulary.

mod decode;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::neural::layers::{
    softmax_cross_entropy, AdditiveAttention, AttentionCache, Dense, Embedding, GruCache, GruCell,
};
use crate::neural::{clip_grad_norm, visit_child, visit_child_mut, zero_grad, AdamState, Checkpoint, Module, Tensor};
use crate::textdata::{ParallelPair, Sentence};
use crate::tokenizer::{BpeModel, TokenSeq, BOS, EOS, PAD};

pub use decode::{decode, decode_batch, ensemble_decode, DecodeConfig, DecodeMode, Hypothesis};

const CHECKPOINT_KIND: &str = "seq2seq";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attn_dim: usize,
    /// Longest source or eos-terminated target, in tokens, accepted for training.
    pub max_len: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            embed_dim: 128,
            hidden_dim: 256,
            attn_dim: 128,
            max_len: 64,
            clip_norm: 5.0,
            seed: 1,
        }
    }
}

impl Seq2SeqConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.embed_dim >= 1 && self.hidden_dim >= 1 && self.attn_dim >= 1,
            "seq2seq dims must be positive"
        );
        ensure!(self.max_len >= 1, "max_len must be at least 1");
        ensure!(self.clip_norm > 0.0, "clip norm must be positive");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqNet {
    pub embedding: Embedding,
    pub encoder: GruCell,
    pub decoder: GruCell,
    pub attention: AdditiveAttention,
    /// `[decoder state; context] -> vocabulary logits`.
    pub output: Dense,
}

impl Module for Seq2SeqNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.embedding, "embedding", f);
        visit_child(&self.encoder, "encoder", f);
        visit_child(&self.decoder, "decoder", f);
        visit_child(&self.attention, "attention", f);
        visit_child(&self.output, "output", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.embedding, "embedding", f);
        visit_child_mut(&mut self.encoder, "encoder", f);
        visit_child_mut(&mut self.decoder, "decoder", f);
        visit_child_mut(&mut self.attention, "attention", f);
        visit_child_mut(&mut self.output, "output", f);
    }
}

/// Padded, time-major view of a batch of `(source, target)` token ids.
#[derive(Debug, Clone)]
pub struct Batch {
    size: usize,
    src_len: usize,
    tgt_len: usize,
    src: Vec<u32>,
    src_mask_tm: Vec<bool>,
    src_mask_bm: Vec<bool>,
    dec_in: Vec<u32>,
    targets: Vec<Option<u32>>,
    tokens: usize,
}

impl Batch {
    /// Targets are given without eos; the decoder learns to emit it.
    pub fn new(pairs: &[(&[u32], &[u32])]) -> Result<Self> {
        ensure!(!pairs.is_empty(), "empty training batch");
        ensure!(
            pairs.iter().all(|(s, _)| !s.is_empty()),
            "batch contains an empty source"
        );
        let size = pairs.len();
        let src_len = pairs.iter().map(|(s, _)| s.len()).max().unwrap_or(1);
        let tgt_len = pairs.iter().map(|(_, t)| t.len() + 1).max().unwrap_or(1);
        let mut src = vec![PAD; src_len * size];
        let mut src_mask_tm = vec![false; src_len * size];
        let mut src_mask_bm = vec![false; src_len * size];
        let mut dec_in = vec![PAD; tgt_len * size];
        let mut targets = vec![None; tgt_len * size];
        let mut tokens = 0;
        for (b, (s, t)) in pairs.iter().enumerate() {
            for (i, &id) in s.iter().enumerate() {
                src[i * size + b] = id;
                src_mask_tm[i * size + b] = true;
                src_mask_bm[b * src_len + i] = true;
            }
            for i in 0..=t.len() {
                dec_in[i * size + b] = if i == 0 { BOS } else { t[i - 1] };
                targets[i * size + b] = Some(if i < t.len() { t[i] } else { EOS });
            }
            tokens += t.len() + 1;
        }
        Ok(Batch {
            size,
            src_len,
            tgt_len,
            src,
            src_mask_tm,
            src_mask_bm,
            dec_in,
            targets,
            tokens,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of predicted target tokens, eos included.
    pub fn tokens(&self) -> usize {
        self.tokens
    }
}

struct Activations {
    enc_x: Vec<f64>,
    enc_caches: Vec<GruCache>,
    keys: Vec<f64>,
    proj_keys: Vec<f64>,
    dec_x: Vec<f64>,
    dec_caches: Vec<GruCache>,
    att_caches: Vec<AttentionCache>,
    /// `(tgt_len * batch) x 2H`, rows time-major.
    features: Vec<f64>,
    logits: Vec<f64>,
}

/// Encoder output for one source sentence, ready for step-wise decoding.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    len: usize,
    keys: Vec<f64>,
    proj_keys: Vec<f64>,
    mask: Vec<bool>,
    final_state: Vec<f64>,
}

impl Seq2SeqNet {
    pub fn new(vocab: usize, config: &Seq2SeqConfig, rng: &mut impl Rng) -> Self {
        let (e, h) = (config.embed_dim, config.hidden_dim);
        Seq2SeqNet {
            embedding: Embedding::new(vocab, e, rng),
            encoder: GruCell::new(e, h, rng),
            decoder: GruCell::new(e, h, rng),
            attention: AdditiveAttention::new(h, h, config.attn_dim, rng),
            output: Dense::new(2 * h, vocab, rng),
        }
    }

    pub fn vocab(&self) -> usize {
        self.output.output_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }

    /// Runs the masked encoder over a time-major batch. Padded steps carry
    /// the previous state, so the final state is that of the last real token.
    fn encode(
        &self,
        src: &[u32],
        mask_tm: &[bool],
        batch: usize,
        len: usize,
    ) -> Result<(Vec<f64>, Vec<GruCache>, Vec<f64>, Vec<f64>)> {
        let h = self.hidden_dim();
        let x = self.embedding.forward(src)?;
        let gx = self.encoder.project_inputs(&x, len * batch)?;
        let g = 3 * h;
        let mut state = vec![0.0; batch * h];
        let mut caches = Vec::with_capacity(len);
        let mut keys = vec![0.0; batch * len * h];
        for t in 0..len {
            let (mut next, cache) = self.encoder.step(&gx[t * batch * g..(t + 1) * batch * g], &state, batch);
            for b in 0..batch {
                if !mask_tm[t * batch + b] {
                    next[b * h..(b + 1) * h].copy_from_slice(&state[b * h..(b + 1) * h]);
                }
                keys[(b * len + t) * h..(b * len + t + 1) * h].copy_from_slice(&next[b * h..(b + 1) * h]);
            }
            caches.push(cache);
            state = next;
        }
        Ok((x, caches, keys, state))
    }

    fn forward(&self, batch: &Batch) -> Result<Activations> {
        let (bs, ls, lt, h) = (batch.size, batch.src_len, batch.tgt_len, self.hidden_dim());
        let (enc_x, enc_caches, keys, final_state) = self.encode(&batch.src, &batch.src_mask_tm, bs, ls)?;
        let proj_keys = self.attention.project_keys(&keys, bs * ls);
        let dec_x = self.embedding.forward(&batch.dec_in)?;
        let gx = self.decoder.project_inputs(&dec_x, lt * bs)?;
        let g = 3 * h;
        let mut state = final_state;
        let mut dec_caches = Vec::with_capacity(lt);
        let mut att_caches = Vec::with_capacity(lt);
        let mut features = vec![0.0; lt * bs * 2 * h];
        for t in 0..lt {
            let (next, cache) = self.decoder.step(&gx[t * bs * g..(t + 1) * bs * g], &state, bs);
            let (ctx, att) = self
                .attention
                .forward(&next, &keys, &proj_keys, &batch.src_mask_bm, bs, ls)?;
            for b in 0..bs {
                let row = &mut features[(t * bs + b) * 2 * h..(t * bs + b + 1) * 2 * h];
                row[..h].copy_from_slice(&next[b * h..(b + 1) * h]);
                row[h..].copy_from_slice(&ctx[b * h..(b + 1) * h]);
            }
            dec_caches.push(cache);
            att_caches.push(att);
            state = next;
        }
        let logits = self.output.forward(&features, lt * bs)?;
        Ok(Activations {
            enc_x,
            enc_caches,
            keys,
            proj_keys,
            dec_x,
            dec_caches,
            att_caches,
            features,
            logits,
        })
    }

    /// Mean cross-entropy per target token under teacher forcing.
    pub fn batch_loss(&self, batch: &Batch) -> Result<f64> {
        let act = self.forward(batch)?;
        let (sum, _) = softmax_cross_entropy(&act.logits, self.vocab(), &batch.targets, 1.0);
        Ok(sum / batch.tokens as f64)
    }

    /// Accumulates the gradient of [`Seq2SeqNet::batch_loss`] and returns the loss.
    pub fn accumulate_gradients(&mut self, batch: &Batch) -> Result<f64> {
        let act = self.forward(batch)?;
        let (bs, ls, lt, h) = (batch.size, batch.src_len, batch.tgt_len, self.hidden_dim());
        let g = 3 * h;
        let scale = 1.0 / batch.tokens as f64;
        let (sum, dlogits) = softmax_cross_entropy(&act.logits, self.vocab(), &batch.targets, scale);

        let mut dfeatures = vec![0.0; act.features.len()];
        self.output.backward(&act.features, &dlogits, lt * bs, Some(&mut dfeatures));

        let mut dkeys = vec![0.0; act.keys.len()];
        let mut dproj = vec![0.0; act.proj_keys.len()];
        let mut dgx = vec![0.0; lt * bs * g];
        let mut carry = vec![0.0; bs * h];
        let mut dctx = vec![0.0; bs * h];
        for t in (0..lt).rev() {
            let mut ds = carry;
            for b in 0..bs {
                let row = &dfeatures[(t * bs + b) * 2 * h..(t * bs + b + 1) * 2 * h];
                for j in 0..h {
                    ds[b * h + j] += row[j];
                }
                dctx[b * h..(b + 1) * h].copy_from_slice(&row[h..]);
            }
            self.attention.backward(
                &act.att_caches[t],
                &act.keys,
                &dctx,
                bs,
                ls,
                &mut ds,
                &mut dkeys,
                &mut dproj,
            );
            let mut dprev = vec![0.0; bs * h];
            self.decoder.backward_step(
                &act.dec_caches[t],
                &ds,
                bs,
                &mut dgx[t * bs * g..(t + 1) * bs * g],
                &mut dprev,
            );
            carry = dprev;
        }
        let mut ddec_x = vec![0.0; act.dec_x.len()];
        self.decoder.backward_inputs(&act.dec_x, &dgx, lt * bs, Some(&mut ddec_x));
        self.embedding.backward(&batch.dec_in, &ddec_x);
        self.attention.backward_keys(&act.keys, &dproj, bs * ls, &mut dkeys);

        let mut dgx = vec![0.0; ls * bs * g];
        for t in (0..ls).rev() {
            let mut dh_new = vec![0.0; bs * h];
            let mut dprev = vec![0.0; bs * h];
            for b in 0..bs {
                let valid = batch.src_mask_tm[t * bs + b];
                let key = &dkeys[(b * ls + t) * h..(b * ls + t + 1) * h];
                for j in 0..h {
                    let d = carry[b * h + j] + key[j];
                    if valid {
                        dh_new[b * h + j] = d;
                    } else {
                        dprev[b * h + j] = d;
                    }
                }
            }
            self.encoder.backward_step(
                &act.enc_caches[t],
                &dh_new,
                bs,
                &mut dgx[t * bs * g..(t + 1) * bs * g],
                &mut dprev,
            );
            carry = dprev;
        }
        let mut denc_x = vec![0.0; act.enc_x.len()];
        self.encoder.backward_inputs(&act.enc_x, &dgx, ls * bs, Some(&mut denc_x));
        self.embedding.backward(&batch.src, &denc_x);
        Ok(sum * scale)
    }

    pub fn encode_source(&self, source: &[u32]) -> Result<EncodedSource> {
        ensure!(!source.is_empty(), "cannot decode an empty source");
        let len = source.len();
        let mask = vec![true; len];
        let (_, _, keys, final_state) = self.encode(source, &mask, 1, len)?;
        let proj_keys = self.attention.project_keys(&keys, len);
        Ok(EncodedSource {
            len,
            keys,
            proj_keys,
            mask,
            final_state,
        })
    }

    /// One decoding step: next-token distribution and the new decoder state.
    pub fn step(&self, src: &EncodedSource, state: &[f64], prev: u32) -> Result<(Vec<f64>, Vec<f64>)> {
        let h = self.hidden_dim();
        let x = self.embedding.forward(&[prev])?;
        let gx = self.decoder.project_inputs(&x, 1)?;
        let (next, _) = self.decoder.step(&gx, state, 1);
        let (ctx, _) = self
            .attention
            .forward(&next, &src.keys, &src.proj_keys, &src.mask, 1, src.len)?;
        let mut feat = Vec::with_capacity(2 * h);
        feat.extend_from_slice(&next);
        feat.extend_from_slice(&ctx);
        let mut probs = self.output.forward(&feat, 1)?;
        crate::neural::layers::softmax_rows(&mut probs, self.vocab());
        Ok((probs, next))
    }
}

/// Token ids of a pair as consumed by training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub source: Vec<u32>,
    pub target: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub tokens: usize,
    /// Pairs dropped for exceeding `max_len`.
    pub skipped: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel {
    pub net: Seq2SeqNet,
    pub bpe: BpeModel,
    pub config: Seq2SeqConfig,
}

impl Seq2SeqModel {
    pub fn new(bpe: BpeModel, config: Seq2SeqConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Seq2SeqModel {
            net: Seq2SeqNet::new(bpe.vocab_size(), &config, &mut rng),
            bpe,
            config,
        })
    }

    pub fn encode_pair(&self, pair: &ParallelPair) -> EncodedPair {
        EncodedPair {
            source: self.bpe.encode(&pair.source).0,
            target: self.bpe.encode(&pair.target).0,
        }
    }

    pub fn fits(&self, pair: &EncodedPair) -> bool {
        !pair.source.is_empty()
            && pair.source.len() <= self.config.max_len
            && pair.target.len() < self.config.max_len
    }

    fn make_batch(&self, pairs: &[&EncodedPair]) -> Result<(Batch, usize)> {
        let kept: Vec<(&[u32], &[u32])> = pairs
            .iter()
            .filter(|p| self.fits(p))
            .map(|p| (p.source.as_slice(), p.target.as_slice()))
            .collect();
        let skipped = pairs.len() - kept.len();
        ensure!(!kept.is_empty(), "every pair in the batch exceeds max_len {}", self.config.max_len);
        Ok((Batch::new(&kept)?, skipped))
    }

    /// Teacher-forced loss without touching gradients.
    pub fn loss(&self, pairs: &[&EncodedPair]) -> Result<f64> {
        let (batch, _) = self.make_batch(pairs)?;
        self.net.batch_loss(&batch)
    }

    /// One optimization step on `pairs`: mean token cross-entropy, global
    /// norm clipping, then Adam at `lr`.
    pub fn train_step(&mut self, pairs: &[&EncodedPair], adam: &mut AdamState, lr: f64) -> Result<StepReport> {
        let (batch, skipped) = self.make_batch(pairs)?;
        zero_grad(&mut self.net);
        let loss = self.net.accumulate_gradients(&batch)?;
        let grad_norm = clip_grad_norm(&mut self.net, self.config.clip_norm);
        adam.step(&mut self.net, lr)?;
        Ok(StepReport {
            loss,
            tokens: batch.tokens(),
            skipped,
            grad_norm,
        })
    }

    pub fn train_step_pairs(&mut self, pairs: &[ParallelPair], adam: &mut AdamState, lr: f64) -> Result<StepReport> {
        let encoded: Vec<EncodedPair> = pairs.iter().map(|p| self.encode_pair(p)).collect();
        self.train_step(&encoded.iter().collect::<Vec<_>>(), adam, lr)
    }

    pub fn translate(&self, source: &Sentence, config: &DecodeConfig) -> Result<Sentence> {
        decode(self, source, config)
    }

    /// Text of generated ids. A hypothesis with no content tokens becomes
    /// the unknown marker so it is still a sentence.
    pub fn detokenize(&self, ids: &[u32]) -> Result<Sentence> {
        let blank = |i: u32| {
            matches!(i, PAD | BOS | EOS) || self.bpe.token(i) == Some(crate::tokenizer::END_OF_WORD)
        };
        if ids.iter().all(|&i| blank(i)) {
            return Sentence::new(crate::tokenizer::UNK_MARKER);
        }
        self.bpe.decode(&TokenSeq(ids.to_vec()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let config = serde_json::json!({
            "model": self.config,
            "bpe": self.bpe.to_json(),
        });
        Checkpoint::capture(CHECKPOINT_KIND, config, &self.net).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        ensure!(
            ckpt.kind == CHECKPOINT_KIND,
            "checkpoint holds a {} model, not a seq2seq model",
            ckpt.kind
        );
        let config: Seq2SeqConfig = serde_json::from_value(ckpt.config["model"].clone())?;
        let bpe = BpeModel::from_json(ckpt.config["bpe"].clone())?;
        let mut model = Seq2SeqModel::new(bpe, config)?;
        ckpt.restore(&mut model.net)?;
        Ok(model)
    }
}

/// Central-difference check of the full step loss on a fixed two-pair batch
/// for a small randomly initialized network. Returns the largest relative
/// error and the parameter where it occurs.
///
/// Parameters are drawn from U(-0.96, 0.96), wider than the training
/// initialization, so that no gradient coordinate sits at the 1e-11
/// rounding floor of the differences.
pub fn gradient_check_fixture(seed: u64) -> Result<(f64, String)> {
    let config = Seq2SeqConfig {
        embed_dim: 4,
        hidden_dim: 5,
        attn_dim: 3,
        max_len: 16,
        clip_norm: 5.0,
        seed,
    };
    let mut net = Seq2SeqNet::new(12, &config, &mut ChaCha8Rng::seed_from_u64(seed));
    net.visit_mut(&mut |_, t| t.values_mut().iter_mut().for_each(|v| *v *= 12.0));
    let batch = Batch::new(&[(&[4, 5, 6], &[7, 8]), (&[9, 10], &[11, 4, 6])])?;
    let mut failure = None;
    let result = crate::neural::gradcheck::check_module(
        &mut net,
        |n| {
            zero_grad(n);
            if let Err(e) = n.accumulate_gradients(&batch) {
                failure = Some(e);
            }
        },
        |n| n.batch_loss(&batch).unwrap_or(f64::NAN),
        crate::neural::gradcheck::EPS,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(result),
    }
}
