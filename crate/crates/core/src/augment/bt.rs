//! Back translation: a formal-to-informal model turns formal monolingual
//! text into synthetic informal sources.

use serde::{Deserialize, Serialize};

use crate::discriminator::DiscriminatorModel;
use crate::error::{ensure, Result};
use crate::fstmodel::{decode_batch, DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use crate::neural::LrSchedule;
use crate::textdata::{Corpus, ParallelDataset, ParallelPair, Provenance};
use crate::tokenizer::BpeModel;
use crate::trainer::{train_single, TrainLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtConfig {
    /// Minimum P+ for a monolingual sentence to count as formal.
    pub formal_threshold: f64,
    pub decode: DecodeConfig,
    pub model: Seq2SeqConfig,
    pub train_steps: u64,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for BtConfig {
    fn default() -> Self {
        BtConfig {
            formal_threshold: 0.9,
            decode: DecodeConfig::greedy(64),
            model: Seq2SeqConfig::default(),
            train_steps: 3000,
            schedule: LrSchedule::warmup_inverse_sqrt(0.0005, 200).expect("valid schedule"),
            batch_size: 32,
            seed: 1,
        }
    }
}

impl BtConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            (0.0..=1.0).contains(&self.formal_threshold),
            "formal threshold must lie in [0, 1], got {}",
            self.formal_threshold
        );
        ensure!(self.train_steps >= 1, "BT training needs at least one step");
        ensure!(self.batch_size >= 1, "batch size must be at least 1");
        self.decode.validate()?;
        self.model.validate()?;
        self.schedule.validate()
    }
}

/// Sentences the discriminator scores at or above `threshold`, in order.
pub fn select_formal(corpus: &Corpus, model: &DiscriminatorModel, threshold: f64) -> Result<Corpus> {
    ensure!(
        (0.0..=1.0).contains(&threshold),
        "formal threshold must lie in [0, 1], got {threshold}"
    );
    let scores = model.score_batch(&corpus.sentences)?;
    let kept = corpus
        .sentences
        .iter()
        .zip(scores)
        .filter(|(_, p)| p.value() >= threshold)
        .map(|(s, _)| s.clone())
        .collect();
    Ok(Corpus::new(format!("{}.formal", corpus.name), kept))
}

/// Trains the reverse model on `parallel` (informal to formal pairs),
/// swapping each pair first.
pub fn train_bt_model(
    parallel: &ParallelDataset,
    bpe: BpeModel,
    config: &BtConfig,
) -> Result<(Seq2SeqModel, TrainLog)> {
    config.validate()?;
    ensure!(!parallel.is_empty(), "BT training needs parallel data");
    let swapped = ParallelDataset::new(parallel.pairs.iter().map(ParallelPair::swapped).collect());
    let model = Seq2SeqModel::new(bpe, config.model.clone())?;
    train_single(
        model,
        &swapped,
        config.train_steps,
        config.schedule,
        config.batch_size,
        config.seed,
    )
}

/// Decodes every formal sentence and pairs (generated informal, formal).
/// Generations identical to their input are dropped.
pub fn generate_bt_pairs(model: &Seq2SeqModel, formal: &Corpus, config: &BtConfig) -> Result<ParallelDataset> {
    config.decode.validate()?;
    let generated = decode_batch(&[model], &formal.sentences, &config.decode)?;
    let mut pairs = Vec::new();
    for (input, output) in formal.sentences.iter().zip(generated) {
        if output != *input {
            pairs.push(ParallelPair::new(output, input.clone(), Provenance::Bt)?);
        }
    }
    Ok(ParallelDataset::new(pairs)
        .with_meta("method", "bt")
        .with_meta("seed", config.seed.to_string()))
}
