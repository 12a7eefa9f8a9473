//! Desk analogues of the BLEU comparison tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::desk::{median, prepare_desk, DeskConfig, DeskData};
use crate::error::{Error, Result};
use crate::fstmodel::Seq2SeqModel;
use crate::textdata::{io, BalanceMode, ParallelDataset};
use crate::trainer::{run_baseline, run_ptft, run_st, RegimeKind, TrainLog, TrainOutputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugSource {
    Bt,
    Fdis,
    Mtask,
    Combined,
}

impl AugSource {
    pub fn dataset(self, data: &DeskData) -> ParallelDataset {
        match self {
            AugSource::Bt => data.bt.clone(),
            AugSource::Fdis => data.fdis.clone(),
            AugSource::Mtask => data.mtask.clone(),
            AugSource::Combined => data.combined(),
        }
    }
}

/// One training configuration of the desk tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeskRun {
    /// Original pairs only.
    Original,
    /// All augmented pairs only, no original data.
    AugmentedOnly,
    St(BalanceMode),
    Ptft(AugSource),
}

impl DeskRun {
    /// File-name friendly name.
    pub fn slug(self) -> &'static str {
        match self {
            DeskRun::Original => "original",
            DeskRun::AugmentedOnly => "augmented",
            DeskRun::St(BalanceMode::None) => "st",
            DeskRun::St(BalanceMode::UpSample) => "st_up",
            DeskRun::St(BalanceMode::DownSample) => "st_down",
            DeskRun::Ptft(AugSource::Combined) => "ptft",
            DeskRun::Ptft(AugSource::Bt) => "ptft_bt",
            DeskRun::Ptft(AugSource::Fdis) => "ptft_fdis",
            DeskRun::Ptft(AugSource::Mtask) => "ptft_mtask",
        }
    }
}

/// Rows of the regime comparison, with their labels.
pub const TABLE1: [(DeskRun, &str); 5] = [
    (DeskRun::Original, "Original data"),
    (DeskRun::St(BalanceMode::None), "ST"),
    (DeskRun::St(BalanceMode::UpSample), "ST (up-sampling)"),
    (DeskRun::St(BalanceMode::DownSample), "ST (down-sampling)"),
    (DeskRun::Ptft(AugSource::Combined), "PT&FT"),
];

/// Optional extra row of the regime comparison.
pub const TABLE1_AUGMENTED_ONLY: (DeskRun, &str) = (DeskRun::AugmentedOnly, "Augmented data");

/// Rows of the per-source comparison, all trained with PT&FT.
pub const TABLE2: [(DeskRun, &str); 5] = [
    (DeskRun::Original, "Original data"),
    (DeskRun::Ptft(AugSource::Bt), "+ BT"),
    (DeskRun::Ptft(AugSource::Fdis), "+ F-Dis"),
    (DeskRun::Ptft(AugSource::Mtask), "+ M-Task"),
    (DeskRun::Ptft(AugSource::Combined), "+ BT + M-Task + F-Dis"),
];

/// Trains one configuration from scratch with the seed of `data`.
pub fn train_run(
    config: &DeskConfig,
    data: &DeskData,
    run: DeskRun,
    checkpoint_dir: Option<&Path>,
) -> Result<(Seq2SeqModel, TrainLog)> {
    let (model_config, mut regime) = config.seeded(data.seed);
    let model = data.fresh_model(&model_config)?;
    let outputs = TrainOutputs {
        eval_set: Some(&data.test),
        checkpoint_dir,
    };
    match run {
        DeskRun::Original => run_baseline(model, data.original(), &regime, outputs),
        DeskRun::AugmentedOnly => run_baseline(model, &data.combined(), &regime, outputs),
        DeskRun::St(mode) => {
            regime.kind = RegimeKind::St;
            regime.st_balance = mode;
            run_st(model, &data.combined(), data.original(), &regime, outputs)
        }
        DeskRun::Ptft(source) => {
            regime.kind = RegimeKind::Ptft;
            run_ptft(model, &source.dataset(data), data.original(), &regime, outputs)
        }
    }
}

/// Final BLEU per run and seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeskResults {
    pub seeds: Vec<u64>,
    pub bleu: BTreeMap<DeskRun, Vec<f64>>,
}

impl DeskResults {
    pub fn median(&self, run: DeskRun) -> Option<f64> {
        self.bleu.get(&run).filter(|v| !v.is_empty()).map(|v| median(v))
    }

    /// Rows for the runs that have results, in the given order.
    pub fn table(&self, title: &str, runs: &[(DeskRun, &str)]) -> TableReport {
        TableReport {
            title: title.to_string(),
            seeds: self.seeds.clone(),
            rows: runs
                .iter()
                .filter_map(|&(r, label)| {
                    Some(TableRow {
                        label: label.to_string(),
                        bleu: self.bleu.get(&r)?.clone(),
                        median: self.median(r)?,
                    })
                })
                .collect(),
        }
    }
}

/// Runs every configuration in `runs` for every seed. With a work
/// directory, checkpoints and logs go to `<work>/seed<k>/<run>/`.
pub fn run_desk_grid(
    config: &DeskConfig,
    seeds: &[u64],
    runs: &[DeskRun],
    work_dir: Option<&Path>,
) -> Result<DeskResults> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Contract("desk grid needs at least one seed".into()));
    }
    let mut results = DeskResults {
        seeds: seeds.to_vec(),
        ..DeskResults::default()
    };
    for &seed in seeds {
        let data = prepare_desk(config, seed)?;
        for &run in runs {
            let dir: Option<PathBuf> = work_dir.map(|w| w.join(format!("seed{seed}")).join(run.slug()));
            let (_, log) = train_run(config, &data, run, dir.as_deref())?;
            let bleu = log
                .final_bleu()
                .ok_or_else(|| Error::Contract(format!("{} produced no BLEU", run.slug())))?;
            log::info!("seed {seed} {}: BLEU {bleu:.2}", run.slug());
            results.bleu.entry(run).or_default().push(bleu);
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub bleu: Vec<f64>,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub title: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{}\n{:width$}", self.title, "system");
        for s in &self.seeds {
            out.push_str(&format!(" {:>7}", format!("seed{s}")));
        }
        out.push_str("  median\n");
        for r in &self.rows {
            out.push_str(&format!("{:width$}", r.label));
            for b in &r.bleu {
                out.push_str(&format!(" {b:>7.2}"));
            }
            out.push_str(&format!("  {:>6.2}\n", r.median));
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_atomic(dir.join(format!("{stem}.txt")), self.render().as_bytes())?;
        io::write_atomic(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(self)?.as_bytes(),
        )
    }
}
