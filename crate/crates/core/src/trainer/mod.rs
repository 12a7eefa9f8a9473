//! Training regimes: pre-train on augmented data then fine-tune on the
//! original data, or train on both at once.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::eval::{corpus_bleu, BleuReport};
use crate::fstmodel::{decode_batch, DecodeConfig, EncodedPair, Seq2SeqModel};
use crate::neural::{AdamState, LrSchedule};
use crate::textdata::{balance, io, BalanceMode, MultiRefTestSet, ParallelDataset, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Ptft,
    St,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRegime {
    pub kind: RegimeKind,
    pub pretrain_steps: u64,
    pub finetune_steps: u64,
    pub pretrain_schedule: LrSchedule,
    pub finetune_lr: f64,
    /// Only read by `St`.
    pub st_balance: BalanceMode,
    pub batch_size: usize,
    pub seed: u64,
    /// Decoding used for BLEU at phase ends.
    pub eval_decode: DecodeConfig,
}

pub const DESK_PRETRAIN_STEPS: u64 = 3000;
pub const DESK_FINETUNE_STEPS: u64 = 1000;
pub const DESK_WARMUP: u64 = 200;
pub const BASE_LR: f64 = 0.0005;
pub const FINETUNE_LR: f64 = 0.00025;

impl TrainingRegime {
    pub fn desk_ptft() -> Self {
        TrainingRegime {
            kind: RegimeKind::Ptft,
            pretrain_steps: DESK_PRETRAIN_STEPS,
            finetune_steps: DESK_FINETUNE_STEPS,
            pretrain_schedule: LrSchedule::warmup_inverse_sqrt(BASE_LR, DESK_WARMUP)
                .expect("valid schedule"),
            finetune_lr: FINETUNE_LR,
            st_balance: BalanceMode::None,
            batch_size: 32,
            seed: 1,
            eval_decode: DecodeConfig::greedy(64),
        }
    }

    pub fn desk_st(balance: BalanceMode) -> Self {
        TrainingRegime {
            kind: RegimeKind::St,
            st_balance: balance,
            ..Self::desk_ptft()
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.pretrain_steps + self.finetune_steps
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.pretrain_steps >= 1 && self.finetune_steps >= 1,
            "step counts must be at least 1"
        );
        ensure!(self.batch_size >= 1, "batch size must be at least 1");
        ensure!(self.finetune_lr > 0.0, "fine-tune learning rate must be positive");
        self.pretrain_schedule.validate()?;
        self.eval_decode.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Finetune,
    /// Simultaneous training on the balanced mix.
    Joint,
    /// Original data only, no augmentation.
    Baseline,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
            Phase::Joint => "joint",
            Phase::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub phase: Phase,
    /// 1-based within the phase.
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEnd {
    pub phase: Phase,
    pub steps: u64,
    /// Pairs of the phase dataset left out for exceeding the model's max_len.
    pub skipped_pairs: usize,
    pub checkpoint: Option<PathBuf>,
    pub bleu: Option<BleuReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
    pub phase_ends: Vec<PhaseEnd>,
}

impl TrainLog {
    pub fn phase_entries(&self, phase: Phase) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.phase == phase)
    }

    /// BLEU at the end of the last phase, if it was evaluated.
    pub fn final_bleu(&self) -> Option<f64> {
        self.phase_ends.last()?.bleu.as_ref().map(|b| b.score)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Where and what to report while training.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOutputs<'a> {
    pub eval_set: Option<&'a MultiRefTestSet>,
    pub checkpoint_dir: Option<&'a Path>,
}

/// Endless stream of batches, each epoch a fresh seeded permutation. A batch
/// that runs past the end of an epoch is completed from the next one.
struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(len: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        EpochSampler { order, pos: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

struct PhaseSpec<'a> {
    phase: Phase,
    data: &'a ParallelDataset,
    steps: u64,
    schedule: LrSchedule,
    /// Every sampled pair must carry this provenance.
    only: Option<Provenance>,
    stream: u64,
}

fn run_phase(
    model: &mut Seq2SeqModel,
    spec: PhaseSpec,
    regime: &TrainingRegime,
    outputs: TrainOutputs,
    log: &mut TrainLog,
) -> Result<()> {
    let mut encoded: Vec<(EncodedPair, Provenance)> = Vec::with_capacity(spec.data.len());
    for pair in &spec.data.pairs {
        let e = model.encode_pair(pair);
        if model.fits(&e) {
            encoded.push((e, pair.provenance()));
        }
    }
    let skipped_pairs = spec.data.len() - encoded.len();
    ensure!(
        !encoded.is_empty(),
        "{} phase has no pair within max_len {}",
        spec.phase.name(),
        model.config.max_len
    );
    if skipped_pairs > 0 {
        log::warn!("{}: skipped {skipped_pairs} over-long pairs", spec.phase.name());
    }
    let mut sampler = EpochSampler::new(encoded.len(), regime.seed, spec.stream);
    let mut adam = AdamState::new();
    for step in 1..=spec.steps {
        let idx = sampler.next_batch(regime.batch_size);
        if let Some(required) = spec.only {
            if let Some(&i) = idx.iter().find(|&&i| encoded[i].1 != required) {
                return Err(Error::Contract(format!(
                    "{} phase sampled a {} pair",
                    spec.phase.name(),
                    encoded[i].1.code()
                )));
            }
        }
        let batch: Vec<&EncodedPair> = idx.iter().map(|&i| &encoded[i].0).collect();
        let lr = spec.schedule.lr_at(step)?;
        let report = model.train_step(&batch, &mut adam, lr)?;
        ensure!(report.loss.is_finite(), "{} step {step}: loss is not finite", spec.phase.name());
        if step % 500 == 0 || step == spec.steps {
            log::info!("{} step {step}/{} lr {lr:.3e} loss {:.4}", spec.phase.name(), spec.steps, report.loss);
        }
        log.entries.push(LogEntry {
            phase: spec.phase,
            step,
            lr,
            loss: report.loss,
        });
    }
    let checkpoint = match outputs.checkpoint_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(format!("{}.ckpt.json", spec.phase.name()));
            model.save(&path)?;
            Some(path)
        }
        None => None,
    };
    let bleu = match outputs.eval_set {
        Some(set) => Some(evaluate(model, set, &regime.eval_decode)?),
        None => None,
    };
    if let Some(b) = &bleu {
        log::info!("{} end: {}", spec.phase.name(), b.render());
    }
    log.phase_ends.push(PhaseEnd {
        phase: spec.phase,
        steps: spec.steps,
        skipped_pairs,
        checkpoint,
        bleu,
    });
    Ok(())
}

/// BLEU of `model` on a multi-reference test set.
pub fn evaluate(model: &Seq2SeqModel, set: &MultiRefTestSet, decode: &DecodeConfig) -> Result<BleuReport> {
    let hyps = decode_batch(&[model], &set.sources(), decode)?;
    corpus_bleu(&hyps, &set.references())
}

fn finish(log: TrainLog, outputs: TrainOutputs) -> Result<TrainLog> {
    if let Some(dir) = outputs.checkpoint_dir {
        log.save(dir.join("train_log.json"))?;
    }
    Ok(log)
}

/// Pre-trains on `augmented` under the warmup schedule, then fine-tunes on
/// `original` at a constant rate with fresh optimizer moments.
pub fn run_ptft(
    mut model: Seq2SeqModel,
    augmented: &ParallelDataset,
    original: &ParallelDataset,
    regime: &TrainingRegime,
    outputs: TrainOutputs,
) -> Result<(Seq2SeqModel, TrainLog)> {
    regime.validate()?;
    ensure!(!original.is_empty(), "fine-tuning needs original data");
    ensure!(!augmented.is_empty(), "pre-training needs augmented data");
    let mut log = TrainLog::default();
    run_phase(
        &mut model,
        PhaseSpec {
            phase: Phase::Pretrain,
            data: augmented,
            steps: regime.pretrain_steps,
            schedule: regime.pretrain_schedule,
            only: None,
            stream: 1,
        },
        regime,
        outputs,
        &mut log,
    )?;
    run_phase(
        &mut model,
        PhaseSpec {
            phase: Phase::Finetune,
            data: original,
            steps: regime.finetune_steps,
            schedule: LrSchedule::constant(regime.finetune_lr)?,
            only: Some(Provenance::Original),
            stream: 2,
        },
        regime,
        outputs,
        &mut log,
    )?;
    Ok((model, finish(log, outputs)?))
}

/// Trains on the balanced mix of both datasets for the full step budget.
pub fn run_st(
    mut model: Seq2SeqModel,
    augmented: &ParallelDataset,
    original: &ParallelDataset,
    regime: &TrainingRegime,
    outputs: TrainOutputs,
) -> Result<(Seq2SeqModel, TrainLog)> {
    regime.validate()?;
    ensure!(
        !original.is_empty() && !augmented.is_empty(),
        "simultaneous training needs original and augmented data"
    );
    let mixed = balance(original, augmented, regime.st_balance, regime.seed)?;
    let mut log = TrainLog::default();
    run_phase(
        &mut model,
        PhaseSpec {
            phase: Phase::Joint,
            data: &mixed,
            steps: regime.total_steps(),
            schedule: regime.pretrain_schedule,
            only: None,
            stream: 3,
        },
        regime,
        outputs,
        &mut log,
    )?;
    Ok((model, finish(log, outputs)?))
}

/// Trains on the original data alone for the full step budget.
pub fn run_baseline(
    mut model: Seq2SeqModel,
    original: &ParallelDataset,
    regime: &TrainingRegime,
    outputs: TrainOutputs,
) -> Result<(Seq2SeqModel, TrainLog)> {
    regime.validate()?;
    ensure!(!original.is_empty(), "baseline training needs original data");
    let mut log = TrainLog::default();
    run_phase(
        &mut model,
        PhaseSpec {
            phase: Phase::Baseline,
            data: original,
            steps: regime.total_steps(),
            schedule: regime.pretrain_schedule,
            only: None,
            stream: 4,
        },
        regime,
        outputs,
        &mut log,
    )?;
    Ok((model, finish(log, outputs)?))
}

/// Dispatches on `regime.kind`.
pub fn run_regime(
    model: Seq2SeqModel,
    augmented: &ParallelDataset,
    original: &ParallelDataset,
    regime: &TrainingRegime,
    outputs: TrainOutputs,
) -> Result<(Seq2SeqModel, TrainLog)> {
    match regime.kind {
        RegimeKind::Ptft => run_ptft(model, augmented, original, regime, outputs),
        RegimeKind::St => run_st(model, augmented, original, regime, outputs),
    }
}

/// Plain single-phase training on `data`, as used for auxiliary models.
pub fn train_single(
    mut model: Seq2SeqModel,
    data: &ParallelDataset,
    steps: u64,
    schedule: LrSchedule,
    batch_size: usize,
    seed: u64,
) -> Result<(Seq2SeqModel, TrainLog)> {
    ensure!(steps >= 1, "step count must be at least 1");
    ensure!(!data.is_empty(), "training needs a non-empty dataset");
    let regime = TrainingRegime {
        batch_size,
        seed,
        ..TrainingRegime::desk_ptft()
    };
    regime.validate()?;
    let mut log = TrainLog::default();
    run_phase(
        &mut model,
        PhaseSpec {
            phase: Phase::Baseline,
            data,
            steps,
            schedule,
            only: None,
            stream: 5,
        },
        &regime,
        TrainOutputs::default(),
        &mut log,
    )?;
    Ok((model, log))
}
