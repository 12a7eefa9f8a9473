//! CNN formality classifier: embedding, a bank of 1-d convolutions with
//! max-pooling over time, dropout and a two-way softmax head.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::neural::layers::{apply_mask, dropout_mask, softmax_cross_entropy, softmax_rows, ConvBank, Dense, Embedding};
use crate::neural::{clip_grad_norm, visit_child, visit_child_mut, zero_grad, AdamState, Checkpoint, Module, Tensor};
use crate::textdata::{FormalityScore, Sentence};
use crate::tokenizer::{BpeModel, TokenSeq};

const CHECKPOINT_KIND: &str = "discriminator";

/// Label index of the formal class; `P₊` is this softmax component.
pub const FORMAL: u32 = 1;
pub const INFORMAL: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub maps: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Share of the labeled data held out for per-epoch accuracy.
    pub held_out_fraction: f64,
    /// Stop after this many epochs without held-out improvement.
    pub patience: Option<usize>,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            embed_dim: 64,
            widths: vec![3, 4, 5],
            maps: 100,
            dropout: 0.5,
            epochs: 10,
            batch_size: 32,
            lr: 0.001,
            held_out_fraction: 0.1,
            patience: None,
            clip_norm: 5.0,
            seed: 1,
        }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.embed_dim >= 1 && self.maps >= 1, "discriminator dims must be positive");
        ensure!(
            !self.widths.is_empty() && self.widths.iter().all(|&w| w >= 1),
            "discriminator needs at least one filter width"
        );
        ensure!((0.0..1.0).contains(&self.dropout), "dropout must be in [0, 1)");
        ensure!(self.batch_size >= 1, "batch size must be positive");
        ensure!(self.lr > 0.0, "learning rate must be positive");
        ensure!(
            (0.0..1.0).contains(&self.held_out_fraction),
            "held-out fraction must be in [0, 1)"
        );
        Ok(())
    }
}

/// The trainable network, without tokenizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    pub embedding: Embedding,
    pub convs: ConvBank,
    pub head: Dense,
    dropout: f64,
}

impl Module for DiscriminatorNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_child(&self.embedding, "embedding", f);
        visit_child(&self.convs, "convs", f);
        visit_child(&self.head, "head", f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_child_mut(&mut self.embedding, "embedding", f);
        visit_child_mut(&mut self.convs, "convs", f);
        visit_child_mut(&mut self.head, "head", f);
    }
}

impl DiscriminatorNet {
    pub fn new(vocab: usize, config: &DiscriminatorConfig, rng: &mut impl Rng) -> Self {
        let embedding = Embedding::new(vocab, config.embed_dim, rng);
        let convs = ConvBank::new(config.embed_dim, &config.widths, config.maps, rng);
        let head = Dense::new(convs.output_dim(), 2, rng);
        DiscriminatorNet {
            embedding,
            convs,
            head,
            dropout: config.dropout,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.convs.output_dim()
    }

    /// Class probabilities `[P₋, P₊]` with dropout disabled.
    pub fn probabilities(&self, tokens: &[u32]) -> Result<[f64; 2]> {
        ensure!(!tokens.is_empty(), "cannot score an empty token sequence");
        let dim = self.embedding.dim();
        let x = self.embedding.forward(tokens)?;
        let (features, _) = self.convs.forward(&x, tokens.len(), dim)?;
        let mut logits = self.head.forward(&features, 1)?;
        softmax_rows(&mut logits, 2);
        Ok([logits[0], logits[1]])
    }

    /// Mean cross-entropy of a batch. `masks` holds one dropout mask per
    /// example (`None` disables dropout).
    pub fn batch_loss(&self, batch: &[(&[u32], u32)], masks: Option<&[Vec<f64>]>) -> Result<f64> {
        let dim = self.embedding.dim();
        let mut total = 0.0;
        for (i, (tokens, label)) in batch.iter().enumerate() {
            ensure!(!tokens.is_empty(), "cannot score an empty token sequence");
            let x = self.embedding.forward(tokens)?;
            let (mut features, _) = self.convs.forward(&x, tokens.len(), dim)?;
            if let Some(m) = masks {
                apply_mask(&mut features, &m[i]);
            }
            let logits = self.head.forward(&features, 1)?;
            total += softmax_cross_entropy(&logits, 2, &[Some(*label)], 1.0).0;
        }
        Ok(total / batch.len() as f64)
    }

    /// Accumulates gradients of [`DiscriminatorNet::batch_loss`] and returns the loss.
    pub fn accumulate_gradients(
        &mut self,
        batch: &[(&[u32], u32)],
        masks: Option<&[Vec<f64>]>,
    ) -> Result<f64> {
        ensure!(!batch.is_empty(), "empty discriminator batch");
        let dim = self.embedding.dim();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for (i, (tokens, label)) in batch.iter().enumerate() {
            ensure!(!tokens.is_empty(), "cannot score an empty token sequence");
            let x = self.embedding.forward(tokens)?;
            let (mut features, cache) = self.convs.forward(&x, tokens.len(), dim)?;
            if let Some(m) = masks {
                apply_mask(&mut features, &m[i]);
            }
            let logits = self.head.forward(&features, 1)?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, 2, &[Some(*label)], scale);
            total += loss;
            let mut dfeatures = vec![0.0; features.len()];
            self.head.backward(&features, &dlogits, 1, Some(&mut dfeatures));
            if let Some(m) = masks {
                apply_mask(&mut dfeatures, &m[i]);
            }
            let dx = self.convs.backward(&cache, &dfeatures, dim);
            self.embedding.backward(tokens, &dx);
        }
        Ok(total * scale)
    }

    pub fn dropout_masks(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| dropout_mask(self.feature_dim(), self.dropout, rng))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// `None` when nothing was held out.
    pub held_out_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorLog {
    pub epochs: Vec<EpochRecord>,
}

/// Trained classifier bundled with the tokenizer it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub net: DiscriminatorNet,
    pub bpe: BpeModel,
    pub config: DiscriminatorConfig,
}

impl DiscriminatorModel {
    pub fn new(bpe: BpeModel, config: DiscriminatorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(DiscriminatorModel {
            net: DiscriminatorNet::new(bpe.vocab_size(), &config, &mut rng),
            bpe,
            config,
        })
    }

    pub fn encode(&self, s: &Sentence) -> TokenSeq {
        self.bpe.encode(s)
    }

    /// P₊(s): probability that `s` is formal. Deterministic.
    pub fn score(&self, s: &Sentence) -> Result<FormalityScore> {
        let tokens = self.encode(s);
        ensure!(!tokens.is_empty(), "cannot score an empty sentence");
        let p = self.net.probabilities(&tokens.0)?;
        FormalityScore::new(p[FORMAL as usize].clamp(0.0, 1.0))
    }

    pub fn score_batch(&self, sentences: &[Sentence]) -> Result<Vec<FormalityScore>> {
        sentences.iter().map(|s| self.score(s)).collect()
    }

    pub fn classify(&self, s: &Sentence) -> Result<bool> {
        Ok(self.score(s)?.value() >= 0.5)
    }

    pub fn accuracy(&self, labeled: &[(Sentence, bool)]) -> Result<f64> {
        ensure!(!labeled.is_empty(), "accuracy of an empty set is undefined");
        let mut correct = 0;
        for (s, label) in labeled {
            if self.classify(s)? == *label {
                correct += 1;
            }
        }
        Ok(correct as f64 / labeled.len() as f64)
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
            "checkpoint holds a {} model, not a discriminator",
            ckpt.kind
        );
        let config: DiscriminatorConfig = serde_json::from_value(ckpt.config["model"].clone())?;
        let bpe = BpeModel::from_json(ckpt.config["bpe"].clone())?;
        let mut model = DiscriminatorModel::new(bpe, config)?;
        ckpt.restore(&mut model.net)?;
        Ok(model)
    }
}

/// Trains on `(sentence, is_formal)` examples. The tail of a seeded shuffle
/// is held out for per-epoch accuracy.
pub fn train_discriminator(
    labeled: &[(Sentence, bool)],
    bpe: &BpeModel,
    config: &DiscriminatorConfig,
) -> Result<(DiscriminatorModel, DiscriminatorLog)> {
    ensure!(
        labeled.iter().any(|(_, l)| *l) && labeled.iter().any(|(_, l)| !*l),
        "discriminator training data must contain both labels"
    );
    let mut model = DiscriminatorModel::new(bpe.clone(), config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));

    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.shuffle(&mut rng);
    let held = ((labeled.len() as f64) * config.held_out_fraction).floor() as usize;
    let (train_idx, held_idx) = order.split_at(labeled.len() - held);
    let held_out: Vec<(Sentence, bool)> = held_idx.iter().map(|&i| labeled[i].clone()).collect();

    let encoded: Vec<(TokenSeq, u32)> = train_idx
        .iter()
        .map(|&i| {
            let (s, l) = &labeled[i];
            let tokens = model.encode(s);
            if tokens.is_empty() {
                return Err(Error::Contract(format!("sentence {:?} encodes to nothing", s.as_str())));
            }
            Ok((tokens, if *l { FORMAL } else { INFORMAL }))
        })
        .collect::<Result<_>>()?;

    let mut adam = AdamState::new();
    let mut log = DiscriminatorLog::default();
    let mut best = (f64::NEG_INFINITY, 0usize, model.net.clone());
    let mut perm: Vec<usize> = (0..encoded.len()).collect();
    for epoch in 1..=config.epochs {
        perm.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in perm.chunks(config.batch_size) {
            let batch: Vec<(&[u32], u32)> = chunk
                .iter()
                .map(|&i| (encoded[i].0 .0.as_slice(), encoded[i].1))
                .collect();
            let masks = model.net.dropout_masks(batch.len(), &mut rng);
            zero_grad(&mut model.net);
            sum += model.net.accumulate_gradients(&batch, Some(&masks))?;
            clip_grad_norm(&mut model.net, config.clip_norm);
            adam.step(&mut model.net, config.lr)?;
            batches += 1;
        }
        let held_out_accuracy = if held_out.is_empty() {
            None
        } else {
            Some(model.accuracy(&held_out)?)
        };
        log::debug!("discriminator epoch {epoch}: loss {:.4} acc {held_out_accuracy:?}", sum / batches as f64);
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: sum / batches as f64,
            held_out_accuracy,
        });
        if let (Some(patience), Some(acc)) = (config.patience, held_out_accuracy) {
            if acc > best.0 {
                best = (acc, epoch, model.net.clone());
            } else if epoch - best.1 >= patience {
                model.net = best.2;
                break;
            }
        }
    }
    Ok((model, log))
}

/// Central-difference check of the batch loss, dropout included, on two
/// sentences for a small randomly initialized network (embedding 5, three
/// maps per width). Returns the largest relative error and its parameter.
///
/// Parameters are drawn from U(-0.48, 0.48) so gradients stay clear of the
/// rounding floor of the differences.
pub fn gradient_check_fixture(seed: u64) -> Result<(f64, String)> {
    let config = DiscriminatorConfig {
        embed_dim: 5,
        maps: 3,
        seed,
        ..DiscriminatorConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DiscriminatorNet::new(12, &config, &mut rng);
    net.visit_mut(&mut |_, t| t.values_mut().iter_mut().for_each(|v| *v *= 6.0));
    let (a, b): (Vec<u32>, Vec<u32>) = (vec![4, 7, 9, 5], vec![6, 8]);
    let batch = [(a.as_slice(), FORMAL), (b.as_slice(), INFORMAL)];
    let masks = net.dropout_masks(2, &mut rng);
    let mut failure = None;
    let result = crate::neural::gradcheck::check_module(
        &mut net,
        |n| {
            zero_grad(n);
            if let Err(e) = n.accumulate_gradients(&batch, Some(&masks)) {
                failure = Some(e);
            }
        },
        |n| n.batch_loss(&batch, Some(&masks)).unwrap_or(f64::NAN),
        crate::neural::gradcheck::EPS,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textdata::Corpus;
    use crate::tokenizer::learn_bpe;

    fn bpe() -> BpeModel {
        let c = Corpus::from_strs("t", &["Hello there .", "hey there lol", "Thank you very much ."]).unwrap();
        learn_bpe(&[&c], 20).unwrap()
    }

    fn small_config(seed: u64) -> DiscriminatorConfig {
        DiscriminatorConfig {
            embed_dim: 5,
            maps: 3,
            seed,
            ..DiscriminatorConfig::default()
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = DiscriminatorModel::new(bpe(), small_config(1)).unwrap();
        let p = model.net.probabilities(&[4, 5, 6]).unwrap();
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_token_sentences_score() {
        let model = DiscriminatorModel::new(bpe(), small_config(1)).unwrap();
        let s = Sentence::new("hey").unwrap();
        let a = model.score(&s).unwrap();
        assert_eq!(a, model.score(&s).unwrap());
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for seed in 0..20 {
            let (err, name) = gradient_check_fixture(seed).unwrap();
            assert!(err < 1e-4, "seed {seed} {name}: {err}");
        }
    }

    #[test]
    fn single_class_data_rejected() {
        let data = vec![(Sentence::new("Hello there .").unwrap(), true)];
        assert!(train_discriminator(&data, &bpe(), &small_config(0)).is_err());
    }

    #[test]
    fn overfits_one_pair_per_class() {
        let data = vec![
            (Sentence::new("Thank you very much .").unwrap(), true),
            (Sentence::new("hey there lol").unwrap(), false),
        ];
        let config = DiscriminatorConfig {
            epochs: 200,
            held_out_fraction: 0.0,
            ..DiscriminatorConfig::default()
        };
        let (model, log) = train_discriminator(&data, &bpe(), &config).unwrap();
        let last = log.epochs.last().unwrap().mean_loss;
        assert!(last < 0.01, "{last}");
        assert!(model.classify(&data[0].0).unwrap());
        assert!(!model.classify(&data[1].0).unwrap());
    }

    #[test]
    fn save_load_preserves_scores_bitwise() {
        let model = DiscriminatorModel::new(bpe(), small_config(5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disc.json");
        model.save(&path).unwrap();
        let back = DiscriminatorModel::load(&path).unwrap();
        let s = Sentence::new("hey there Thank you").unwrap();
        assert_eq!(model.score(&s).unwrap(), back.score(&s).unwrap());
    }
}
