//! Desk-scale experiment recipes and their run configuration.

mod desk;
mod tables;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use desk::{
    augment_base, median, prepare_base, prepare_desk, DeskBase, DeskConfig, DeskData, DESK_BASE_LR,
    DESK_FINETUNE_LR,
};
pub use tables::{
    run_desk_grid, train_run, AugSource, DeskResults, DeskRun, TableReport, TableRow, TABLE1,
    TABLE1_AUGMENTED_ONLY, TABLE2,
};

use crate::augment::fdis::{pivot_report, run_fdis, FdisConfig, MockProvider, MockStrength, PivotReport, RoundTripCache};
use crate::error::{ensure, Error, Result};
use crate::eval::{build_humaneval_batch, save_items};
use crate::fstmodel::{decode_batch, Seq2SeqModel};
use crate::textdata::{io, BalanceMode, Corpus, Pivot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipeName {
    Table1Desk,
    Table2Desk,
    Table5Desk,
    HumanevalDesk,
}

impl RecipeName {
    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| Error::Contract(format!("unknown recipe `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Table5Config {
    /// Informal sentences sent through each mock provider.
    pub corpus_size: usize,
    pub sigma: f64,
}

impl Default for Table5Config {
    fn default() -> Self {
        Table5Config {
            corpus_size: 1000,
            sigma: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanevalConfig {
    pub items: usize,
    pub seed: u64,
    /// Load checkpoints from earlier table runs in `work_dir` instead of
    /// training the four systems again.
    pub reuse_checkpoints: bool,
}

impl Default for HumanevalConfig {
    fn default() -> Self {
        HumanevalConfig {
            items: 300,
            seed: 1,
            reuse_checkpoints: false,
        }
    }
}

/// Everything a recipe run needs. Serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Checkpoints and training logs; none are kept when absent.
    pub work_dir: Option<PathBuf>,
    pub desk: DeskConfig,
    /// Adds the augmented-data-only row to the regime table.
    pub include_augmented_only: bool,
    pub table5: Table5Config,
    pub humaneval: HumanevalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("reports"),
            work_dir: None,
            desk: DeskConfig::default(),
            include_augmented_only: false,
            table5: Table5Config::default(),
            humaneval: HumanevalConfig::default(),
        }
    }
}

fn check_dir_target(path: &Path, what: &str) -> Result<()> {
    ensure!(
        !path.exists() || path.is_dir(),
        "{what} {} exists and is not a directory",
        path.display()
    );
    Ok(())
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(&io::read_text(path)?)?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    /// Checks values and every referenced path before any work starts.
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "config needs at least one seed");
        self.desk.validate()?;
        check_dir_target(&self.out_dir, "out_dir")?;
        if let Some(w) = &self.work_dir {
            check_dir_target(w, "work_dir")?;
        }
        if let Some(cache) = &self.desk.fdis.cache_path {
            ensure!(!cache.is_dir(), "fdis cache_path {} is a directory", cache.display());
        }
        ensure!(
            (0.0..=1.0).contains(&self.table5.sigma),
            "table5 sigma must lie in [0, 1]"
        );
        ensure!(self.table5.corpus_size >= 1, "table5 corpus_size must be at least 1");
        ensure!(self.humaneval.items >= 1, "humaneval items must be at least 1");
        if self.humaneval.reuse_checkpoints {
            ensure!(
                self.work_dir.is_some(),
                "humaneval reuse_checkpoints needs a work_dir"
            );
        }
        Ok(())
    }
}

/// Runs a recipe and returns the report files it wrote.
pub fn run_recipe(name: RecipeName, config: &RunConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    match name {
        RecipeName::Table1Desk => {
            let mut rows = TABLE1.to_vec();
            if config.include_augmented_only {
                rows.insert(1, TABLE1_AUGMENTED_ONLY);
            }
            let runs: Vec<DeskRun> = rows.iter().map(|(r, _)| *r).collect();
            let results = run_desk_grid(&config.desk, &config.seeds, &runs, config.work_dir.as_deref())?;
            let table = results.table("Regime comparison (BLEU)", &rows);
            table.write(&config.out_dir, "table1_desk")?;
            Ok(report_paths(&config.out_dir, "table1_desk"))
        }
        RecipeName::Table2Desk => {
            let runs: Vec<DeskRun> = TABLE2.iter().map(|(r, _)| *r).collect();
            let results = run_desk_grid(&config.desk, &config.seeds, &runs, config.work_dir.as_deref())?;
            let table = results.table("Augmentation sources with PT&FT (BLEU)", &TABLE2);
            table.write(&config.out_dir, "table2_desk")?;
            Ok(report_paths(&config.out_dir, "table2_desk"))
        }
        RecipeName::Table5Desk => {
            let report = table5_desk(&config.desk, &config.table5, config.seeds[0])?;
            std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
            io::write_atomic(config.out_dir.join("table5_desk.txt"), report.render().as_bytes())?;
            io::write_atomic(
                config.out_dir.join("table5_desk.json"),
                serde_json::to_string_pretty(&report)?.as_bytes(),
            )?;
            Ok(report_paths(&config.out_dir, "table5_desk"))
        }
        RecipeName::HumanevalDesk => humaneval_desk(config),
    }
}

fn report_paths(dir: &Path, stem: &str) -> Vec<PathBuf> {
    vec![dir.join(format!("{stem}.txt")), dir.join(format!("{stem}.json"))]
}

/// F-Dis under the three mock providers over the same informal corpus.
pub fn table5_desk(desk: &DeskConfig, table5: &Table5Config, seed: u64) -> Result<PivotReport> {
    let base = prepare_base(desk, seed)?;
    let sentences: Vec<_> = base
        .corpus
        .informal_mono
        .sentences
        .iter()
        .take(table5.corpus_size)
        .cloned()
        .collect();
    let corpus = Corpus::new("informal_mono", sentences);
    let fdis = FdisConfig {
        sigma: table5.sigma,
        ..desk.fdis.clone()
    };
    let mut datasets = BTreeMap::new();
    for (strength, pivot) in [
        (MockStrength::Strong, Pivot::MockStrong),
        (MockStrength::Medium, Pivot::MockMedium),
        (MockStrength::Weak, Pivot::MockWeak),
    ] {
        let provider = MockProvider::new(strength);
        let (ds, _) = run_fdis(
            &provider,
            &corpus,
            pivot,
            &base.discriminator,
            &fdis,
            &mut RoundTripCache::in_memory(),
        )?;
        datasets.insert(pivot, ds);
    }
    Ok(pivot_report(&datasets))
}

/// The four systems compared by the human evaluation.
pub const HUMANEVAL_SYSTEMS: [DeskRun; 4] = [
    DeskRun::Original,
    DeskRun::St(BalanceMode::None),
    DeskRun::Ptft(AugSource::Bt),
    DeskRun::Ptft(AugSource::Combined),
];

fn final_checkpoint(work: &Path, seed: u64, run: DeskRun) -> PathBuf {
    let phase = match run {
        DeskRun::Original | DeskRun::AugmentedOnly => "baseline",
        DeskRun::St(_) => "joint",
        DeskRun::Ptft(_) => "finetune",
    };
    work.join(format!("seed{seed}"))
        .join(run.slug())
        .join(format!("{phase}.ckpt.json"))
}

/// Decodes the test set with four systems and writes an anonymized
/// annotation batch: `items.json` for annotators, `key.json` kept apart,
/// plus the raw outputs per system.
fn humaneval_desk(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let seed = config.seeds[0];
    let data = prepare_desk(&config.desk, seed)?;
    let mut outputs = BTreeMap::new();
    let sources = data.test.sources();
    for run in HUMANEVAL_SYSTEMS {
        let model = if config.humaneval.reuse_checkpoints {
            let work = config.work_dir.as_deref().expect("validated");
            let path = final_checkpoint(work, seed, run);
            ensure!(
                path.exists(),
                "humaneval_desk needs the {} checkpoint from the table recipes; missing {}",
                run.slug(),
                path.display()
            );
            Seq2SeqModel::load(&path)?
        } else {
            let dir = config
                .work_dir
                .as_ref()
                .map(|w| w.join(format!("seed{seed}")).join(run.slug()));
            train_run(&config.desk, &data, run, dir.as_deref())?.0
        };
        let hyps = decode_batch(&[&model], &sources, &config.desk.regime.eval_decode)?;
        outputs.insert(run.slug().to_string(), hyps);
    }
    let n = config.humaneval.items.min(sources.len());
    let batch = build_humaneval_batch(&sources, &outputs, n, config.humaneval.seed)?;
    let dir = config.out_dir.join("humaneval_desk");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = vec![dir.join("items.json"), dir.join("key.json")];
    save_items(&written[0], &batch.items)?;
    batch.key.save(&written[1])?;
    for (system, hyps) in &outputs {
        let path = dir.join(format!("{system}.txt"));
        io::save_lines(&path, hyps.iter())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_names_parse() {
        assert_eq!(RecipeName::parse("table1_desk").unwrap(), RecipeName::Table1Desk);
        assert_eq!(RecipeName::parse("humaneval_desk").unwrap(), RecipeName::HumanevalDesk);
        assert!(RecipeName::parse("table3").is_err());
    }

    #[test]
    fn config_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let config = RunConfig {
            out_dir: dir.path().join("out"),
            ..RunConfig::default()
        };
        config.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(loaded, config);
        loaded.validate().unwrap();
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seeds": [4]}"#).unwrap();
        assert_eq!(c.seeds, [4]);
        assert_eq!(c.desk, DeskConfig::default());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, "x").unwrap();
        let mut c = RunConfig {
            out_dir: file,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c.out_dir = dir.path().join("out");
        c.seeds.clear();
        assert!(c.validate().is_err());
        c.seeds = vec![1];
        c.desk.fdis.sigma = 1.5;
        assert!(c.validate().is_err());
        c.desk.fdis.sigma = 0.6;
        c.humaneval.reuse_checkpoints = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_checkpoint_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig {
            out_dir: dir.path().join("out"),
            work_dir: Some(dir.path().join("work")),
            seeds: vec![1],
            ..RunConfig::default()
        };
        c.humaneval.reuse_checkpoints = true;
        c.desk.parallel = 50;
        c.desk.test_items = 10;
        c.desk.labeled = 50;
        c.desk.gec_records = 20;
        c.desk.bpe_merges = 50;
        c.desk.discriminator.epochs = 1;
        c.desk.bt.train_steps = 2;
        let err = run_recipe(RecipeName::HumanevalDesk, &c).unwrap_err().to_string();
        assert!(err.contains("original checkpoint"), "{err}");
    }
}
