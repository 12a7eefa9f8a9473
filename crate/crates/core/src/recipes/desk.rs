//! The synthetic benchmark shared by the desk recipes: data, tokenizer,
//! discriminator and the three augmented datasets for one seed.

use serde::{Deserialize, Serialize};

use crate::augment::bt::{generate_bt_pairs, select_formal, train_bt_model, BtConfig};
use crate::augment::fdis::{provider_by_name, run_fdis, FdisConfig, RoundTripCache};
use crate::augment::mtask::{mtask_pairs, AnnotatorMode};
use crate::discriminator::{train_discriminator, DiscriminatorConfig, DiscriminatorModel};
use crate::error::{ensure, Result};
use crate::fstmodel::{DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use crate::neural::LrSchedule;
use crate::textdata::synthetic::{generate_labeled, generate_synthetic_gec, generate_test_set};
use crate::textdata::{
    generate_synthetic_fst, MultiRefTestSet, ParallelDataset, Pivot, SyntheticFst,
};
use crate::tokenizer::{learn_bpe, BpeModel};
use crate::trainer::{TrainingRegime, DESK_WARMUP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskConfig {
    /// Original parallel pairs; monolingual splits are four times larger.
    pub parallel: usize,
    pub test_items: usize,
    pub bpe_merges: usize,
    /// Formal and informal sentences each for the discriminator.
    pub labeled: usize,
    pub gec_records: usize,
    pub discriminator: DiscriminatorConfig,
    pub bt: BtConfig,
    pub fdis: FdisConfig,
    pub fdis_provider: String,
    pub fdis_pivot: Pivot,
    pub model: Seq2SeqConfig,
    pub regime: TrainingRegime,
}

/// The small desk model is far from converged after 4000 steps at the
/// full-size rate, so desk recipes train twenty times faster. Fine-tuning
/// starts near where the pre-training schedule ends.
pub const DESK_BASE_LR: f64 = 0.01;
pub const DESK_FINETUNE_LR: f64 = 0.0025;

impl Default for DeskConfig {
    fn default() -> Self {
        let model = Seq2SeqConfig {
            embed_dim: 32,
            hidden_dim: 64,
            attn_dim: 32,
            max_len: 48,
            clip_norm: 5.0,
            seed: 1,
        };
        let regime = TrainingRegime {
            pretrain_schedule: LrSchedule::warmup_inverse_sqrt(DESK_BASE_LR, DESK_WARMUP).expect("valid schedule"),
            finetune_lr: DESK_FINETUNE_LR,
            batch_size: 16,
            eval_decode: DecodeConfig::greedy(48),
            ..TrainingRegime::desk_ptft()
        };
        DeskConfig {
            parallel: 1000,
            test_items: 300,
            bpe_merges: 400,
            labeled: 1000,
            gec_records: 2500,
            discriminator: DiscriminatorConfig::default(),
            bt: BtConfig {
                model: model.clone(),
                decode: DecodeConfig::greedy(48),
                train_steps: 2000,
                schedule: LrSchedule::warmup_inverse_sqrt(DESK_BASE_LR, DESK_WARMUP).expect("valid schedule"),
                batch_size: 16,
                ..BtConfig::default()
            },
            fdis: FdisConfig::default(),
            fdis_provider: "mock-medium".into(),
            fdis_pivot: Pivot::MockMedium,
            model,
            regime,
        }
    }
}

impl DeskConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.parallel >= 1, "desk benchmark needs parallel data");
        ensure!(self.test_items >= 1, "desk benchmark needs test items");
        ensure!(self.labeled >= 1, "discriminator needs labeled data");
        self.discriminator.validate()?;
        self.bt.validate()?;
        self.fdis.validate()?;
        self.model.validate()?;
        self.regime.validate()
    }

    /// Model and regime seeded for one run.
    pub fn seeded(&self, seed: u64) -> (Seq2SeqConfig, TrainingRegime) {
        let mut model = self.model.clone();
        model.seed = seed;
        let mut regime = self.regime.clone();
        regime.seed = seed;
        (model, regime)
    }
}

/// Everything a desk table needs for one seed.
pub struct DeskData {
    pub seed: u64,
    pub corpus: SyntheticFst,
    pub test: MultiRefTestSet,
    pub bpe: BpeModel,
    pub discriminator: DiscriminatorModel,
    pub bt: ParallelDataset,
    pub fdis: ParallelDataset,
    pub mtask: ParallelDataset,
}

impl DeskData {
    pub fn original(&self) -> &ParallelDataset {
        &self.corpus.parallel
    }

    /// BT, F-Dis and M-Task pairs concatenated.
    pub fn combined(&self) -> ParallelDataset {
        ParallelDataset::concat([&self.bt, &self.fdis, &self.mtask]).with_meta("method", "combined")
    }

    pub fn fresh_model(&self, config: &Seq2SeqConfig) -> Result<Seq2SeqModel> {
        Seq2SeqModel::new(self.bpe.clone(), config.clone())
    }
}

/// The parts of the benchmark that need no seq2seq training.
pub struct DeskBase {
    pub seed: u64,
    pub corpus: SyntheticFst,
    pub test: MultiRefTestSet,
    pub bpe: BpeModel,
    pub discriminator: DiscriminatorModel,
    pub mtask: ParallelDataset,
}

/// Synthetic corpora, BPE over all of their text, the discriminator and
/// the M-Task pairs.
pub fn prepare_base(config: &DeskConfig, seed: u64) -> Result<DeskBase> {
    config.validate()?;
    let corpus = generate_synthetic_fst(seed, config.parallel)?;
    let test = generate_test_set(seed, config.test_items)?;
    let gec = generate_synthetic_gec(seed, config.gec_records)?;
    let mtask = mtask_pairs(&gec, AnnotatorMode::All);

    let bpe = learn_bpe(
        &[
            &corpus.parallel.sources(),
            &corpus.parallel.targets(),
            &corpus.formal_mono,
            &corpus.informal_mono,
            &mtask.sources(),
            &mtask.targets(),
        ],
        config.bpe_merges,
    )?;
    log::info!("seed {seed}: bpe vocabulary {}", bpe.vocab_size());

    let labeled = generate_labeled(seed, config.labeled)?;
    let mut disc_config = config.discriminator.clone();
    disc_config.seed = seed;
    let (discriminator, _) = train_discriminator(&labeled, &bpe, &disc_config)?;
    Ok(DeskBase {
        seed,
        corpus,
        test,
        bpe,
        discriminator,
        mtask,
    })
}

/// Adds the BT and F-Dis datasets to `base`.
pub fn augment_base(config: &DeskConfig, base: DeskBase) -> Result<DeskData> {
    let seed = base.seed;
    let mut bt_config = config.bt.clone();
    bt_config.seed = seed;
    bt_config.model.seed = seed;
    let (bt_model, _) = train_bt_model(&base.corpus.parallel, base.bpe.clone(), &bt_config)?;
    let formal = select_formal(&base.corpus.formal_mono, &base.discriminator, bt_config.formal_threshold)?;
    let bt = generate_bt_pairs(&bt_model, &formal, &bt_config)?;

    let provider = provider_by_name(&config.fdis_provider, None)?;
    let (fdis, _) = run_fdis(
        provider.as_ref(),
        &base.corpus.informal_mono,
        config.fdis_pivot,
        &base.discriminator,
        &config.fdis,
        &mut RoundTripCache::in_memory(),
    )?;
    log::info!(
        "seed {seed}: augmented pairs bt {} fdis {} mtask {}",
        bt.len(),
        fdis.len(),
        base.mtask.len()
    );
    Ok(DeskData {
        seed,
        corpus: base.corpus,
        test: base.test,
        bpe: base.bpe,
        discriminator: base.discriminator,
        bt,
        fdis,
        mtask: base.mtask,
    })
}

/// Builds the synthetic corpora, learns BPE on all of their text, trains
/// the discriminator, and produces the BT, F-Dis and M-Task datasets.
pub fn prepare_desk(config: &DeskConfig, seed: u64) -> Result<DeskData> {
    augment_base(config, prepare_base(config, seed)?)
}

/// Median of a non-empty list; the mean of the middle two for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
