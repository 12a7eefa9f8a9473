use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fstaug::augment::bt::{generate_bt_pairs, select_formal, BtConfig};
use fstaug::augment::fdis::{provider_by_name, run_fdis, FdisConfig, RoundTripCache};
use fstaug::augment::mtask::{mtask_from_files, AnnotatorMode};
use fstaug::discriminator::{train_discriminator, DiscriminatorConfig, DiscriminatorModel};
use fstaug::eval::{aggregate_ratings, build_humaneval_batch, corpus_bleu, save_items, HiddenKey, RatingStore};
use fstaug::fstmodel::{decode_batch, DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use fstaug::recipes::{run_recipe, DeskConfig, RecipeName, RunConfig};
use fstaug::textdata::synthetic::{generate_labeled, generate_synthetic_fst, generate_synthetic_gec, generate_test_set};
use fstaug::textdata::{io, m2, BalanceMode, Corpus, ParallelDataset, ParallelPair, Pivot, Sentence};
use fstaug::tokenizer::{learn_bpe, BpeModel};
use fstaug::trainer::{run_baseline, run_ptft, run_st, TrainLog, TrainOutputs, TrainingRegime};
use fstaug::{Error, Result};

use crate::server::{serve, AppState};

/// Endpoint of the real translation service used by `--provider http`.
pub const ENDPOINT_ENV: &str = "FSTAUG_MT_ENDPOINT";

#[derive(Parser, Debug)]
#[command(name = "fstaug", version, about = "Parallel-data augmentation for formality style transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic benchmark.
    Data(DataArgs),
    #[command(subcommand)]
    Bpe(BpeCommand),
    #[command(subcommand)]
    Discriminator(DiscCommand),
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Train a transfer model (PT&FT, ST or original data only).
    Train(TrainArgs),
    /// Decode a line file; several checkpoints decode as an ensemble.
    Translate(TranslateArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a desk-scale experiment recipe.
    Recipe(RecipeArgs),
    /// Serve the annotation API (and UI bundle, if given).
    ServeAnnotation(ServeArgs),
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Parallel pairs; monolingual splits get four times as many.
    #[arg(long, default_value_t = 1000)]
    pub parallel: usize,
    #[arg(long, default_value_t = 300)]
    pub test_items: usize,
    /// Sentences per class for the discriminator.
    #[arg(long, default_value_t = 1000)]
    pub labeled: usize,
    #[arg(long, default_value_t = 2500)]
    pub gec_records: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum BpeCommand {
    /// Learn merges over line, TSV, JSON-lines or M2 files.
    Learn {
        #[arg(long = "in", value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = fstaug::tokenizer::DEFAULT_MERGES)]
        merges: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print space-separated subword tokens for each line.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum DiscCommand {
    Train {
        /// `label<TAB>sentence` lines, 1 formal and 0 informal.
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        bpe: PathBuf,
        /// DiscriminatorConfig as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write `score<TAB>sentence` per input line.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum AugmentCommand {
    /// Back-translate formal text with a formal-to-informal model.
    Bt {
        #[arg(long)]
        formal: PathBuf,
        #[arg(long)]
        bt_model: PathBuf,
        /// Keep only sentences this discriminator scores as formal.
        #[arg(long)]
        disc: Option<PathBuf>,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
        #[arg(long, default_value_t = 1)]
        beam: usize,
        #[arg(long, default_value_t = 64)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Round-trip translation filtered by formality gain.
    Fdis {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        disc: PathBuf,
        #[arg(long, default_value = "mock-strong")]
        provider: String,
        #[arg(long, default_value = "de")]
        pivot: String,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// FdisConfig as JSON; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = ENDPOINT_ENV)]
        endpoint: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairs from grammatical-error-correction annotations.
    Mtask {
        #[arg(long, value_delimiter = ',', required = true)]
        m2: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Annotators::All)]
        annotators: Annotators,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Annotators {
    All,
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Ptft,
    St,
    Baseline,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BalanceArg {
    None,
    Up,
    Down,
}

impl From<BalanceArg> for BalanceMode {
    fn from(b: BalanceArg) -> Self {
        match b {
            BalanceArg::None => BalanceMode::None,
            BalanceArg::Up => BalanceMode::UpSample,
            BalanceArg::Down => BalanceMode::DownSample,
        }
    }
}

/// Model and regime settings for `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: Seq2SeqConfig,
    pub regime: TrainingRegime,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let desk = DeskConfig::default();
        TrainConfig {
            model: desk.model,
            regime: desk.regime,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.regime.validate()
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    /// Augmented datasets, concatenated in order.
    #[arg(long, value_delimiter = ',')]
    pub aug: Vec<PathBuf>,
    #[arg(long)]
    pub orig: PathBuf,
    #[arg(long)]
    pub bpe: PathBuf,
    /// Multi-reference test set for BLEU at phase ends.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub balance: Option<BalanceArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Swap every pair first, giving a formal-to-informal model for BT.
    #[arg(long)]
    pub reverse: bool,
    /// Drop repeated augmented pairs before training.
    #[arg(long)]
    pub dedup: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TranslateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub model: Vec<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub beam: usize,
    #[arg(long, default_value_t = 64)]
    pub max_len: usize,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        /// One line file per reference set.
        #[arg(long, value_delimiter = ',', conflicts_with = "multiref")]
        refs: Vec<PathBuf>,
        /// Test set TSV holding source and references.
        #[arg(long)]
        multiref: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    HumanevalBuild {
        #[arg(long)]
        src: PathBuf,
        /// `system_id=outputs.txt`, four times.
        #[arg(long = "system", required = true)]
        systems: Vec<String>,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    HumanevalReport {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        baseline: String,
        #[arg(long, default_value_t = fstaug::eval::humaneval::BOOTSTRAP_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct RecipeArgs {
    /// table1_desk, table2_desk, table5_desk or humaneval_desk.
    pub name: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub items: PathBuf,
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding the built annotation UI.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConfigKind {
    Run,
    Train,
}

#[derive(Subcommand, Debug)]
pub enum ConfigCommand {
    /// Check a JSON config, including the paths it names.
    Validate {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = ConfigKind::Run)]
        kind: ConfigKind,
    },
    /// Print the default config as JSON.
    Default {
        #[arg(long, value_enum, default_value_t = ConfigKind::Run)]
        kind: ConfigKind,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Data(a) => data(&a),
        Command::Bpe(c) => bpe(c),
        Command::Discriminator(c) => discriminator(c),
        Command::Augment(c) => augment(c),
        Command::Train(a) => train(&a),
        Command::Translate(a) => translate(&a),
        Command::Eval(c) => eval(c),
        Command::Recipe(a) => recipe(a),
        Command::ServeAnnotation(a) => serve_annotation(a),
        Command::Config(c) => config(c),
    }
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} {} not found", path.display())))
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&io::read_text(path)?)?)
}

fn data(a: &DataArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let d = |f: &str| a.out_dir.join(f);
    let fst = generate_synthetic_fst(a.seed, a.parallel)?;
    io::save_tsv(d("train.tsv"), &fst.parallel)?;
    io::save_lines(d("formal_mono.txt"), &fst.formal_mono.sentences)?;
    io::save_lines(d("informal_mono.txt"), &fst.informal_mono.sentences)?;
    io::save_multiref(d("test.tsv"), &generate_test_set(a.seed, a.test_items)?)?;
    io::save_labeled(d("labeled.tsv"), &generate_labeled(a.seed, a.labeled)?)?;
    io::write_atomic(d("gec.m2"), m2::write_m2(&generate_synthetic_gec(a.seed, a.gec_records)?).as_bytes())?;
    println!("wrote benchmark files to {}", a.out_dir.display());
    Ok(())
}

/// Every sentence a file holds, both sides for pair formats.
fn text_of(path: &Path) -> Result<Corpus> {
    let name = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let sides = |pairs: &[ParallelPair]| {
        pairs
            .iter()
            .flat_map(|p| [p.source.clone(), p.target.clone()])
            .collect::<Vec<_>>()
    };
    Ok(match ext {
        "tsv" => Corpus::new(name, sides(&io::load_tsv(path)?.pairs)),
        "jsonl" => Corpus::new(name, sides(&io::load_jsonl(path)?.pairs)),
        "m2" => {
            let records = m2::parse_m2(&io::read_text(path)?)?;
            let ds = fstaug::augment::mtask::mtask_pairs(&records, AnnotatorMode::All);
            Corpus::new(name, sides(&ds.pairs))
        }
        _ => io::load_lines(path)?,
    })
}

fn bpe(c: BpeCommand) -> Result<()> {
    match c {
        BpeCommand::Learn { inputs, merges, out } => {
            let corpora = inputs.iter().map(|p| text_of(p)).collect::<Result<Vec<_>>>()?;
            let model = learn_bpe(&corpora.iter().collect::<Vec<_>>(), merges)?;
            model.save(&out)?;
            println!("vocab {} ({} merges) -> {}", model.vocab_size(), model.merges().len(), out.display());
        }
        BpeCommand::Encode { model, input, out } => {
            let model = BpeModel::load(&model)?;
            let mut text = String::new();
            for s in &io::load_lines(&input)?.sentences {
                let toks: Vec<&str> = model
                    .encode(s)
                    .0
                    .iter()
                    .map(|&i| model.token(i).unwrap_or(fstaug::tokenizer::UNK_MARKER))
                    .collect();
                text.push_str(&toks.join(" "));
                text.push('\n');
            }
            io::write_atomic(&out, text.as_bytes())?;
        }
    }
    Ok(())
}

fn discriminator(c: DiscCommand) -> Result<()> {
    match c {
        DiscCommand::Train {
            labeled,
            bpe,
            config,
            epochs,
            seed,
            out,
        } => {
            let mut cfg: DiscriminatorConfig = match &config {
                Some(p) => load_json(p)?,
                None => DiscriminatorConfig::default(),
            };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let data = io::load_labeled(&labeled)?;
            let (model, log) = train_discriminator(&data, &BpeModel::load(&bpe)?, &cfg)?;
            model.save(&out)?;
            match log.epochs.last().and_then(|e| e.held_out_accuracy) {
                Some(acc) => println!("trained {} epochs, held-out accuracy {acc:.4}", log.epochs.len()),
                None => println!("trained {} epochs", log.epochs.len()),
            }
        }
        DiscCommand::Score { model, input, out } => {
            let model = DiscriminatorModel::load(&model)?;
            let corpus = io::load_lines(&input)?;
            let scores = model.score_batch(&corpus.sentences)?;
            let text: String = corpus
                .sentences
                .iter()
                .zip(scores)
                .map(|(s, p)| format!("{:.6}\t{}\n", p.value(), s.as_str()))
                .collect();
            io::write_atomic(&out, text.as_bytes())?;
        }
        DiscCommand::Evaluate { model, labeled } => {
            let model = DiscriminatorModel::load(&model)?;
            let acc = model.accuracy(&io::load_labeled(&labeled)?)?;
            println!("accuracy {acc:.4}");
        }
    }
    Ok(())
}

fn augment(c: AugmentCommand) -> Result<()> {
    match c {
        AugmentCommand::Bt {
            formal,
            bt_model,
            disc,
            threshold,
            beam,
            max_len,
            out,
        } => {
            if !bt_model.exists() {
                return Err(Error::Contract(format!(
                    "BT model {} not found; train one first with `fstaug train --regime baseline --reverse`",
                    bt_model.display()
                )));
            }
            let model = Seq2SeqModel::load(&bt_model)?;
            let mut corpus = io::load_lines(&formal)?;
            if let Some(d) = disc {
                corpus = select_formal(&corpus, &DiscriminatorModel::load(&d)?, threshold)?;
            }
            let config = BtConfig {
                formal_threshold: threshold,
                decode: decode_config(beam, max_len),
                ..BtConfig::default()
            };
            let ds = generate_bt_pairs(&model, &corpus, &config)?;
            io::save_jsonl(&out, &ds)?;
            println!("{} BT pairs from {} formal sentences", ds.len(), corpus.len());
        }
        AugmentCommand::Fdis {
            input,
            disc,
            provider,
            pivot,
            sigma,
            cache,
            config,
            endpoint,
            out,
        } => {
            let mut cfg: FdisConfig = match &config {
                Some(p) => load_json(p)?,
                None => FdisConfig::default(),
            };
            if let Some(s) = sigma {
                cfg.sigma = s;
            }
            if cache.is_some() {
                cfg.cache_path = cache;
            }
            cfg.validate()?;
            let pivot = Pivot::parse(&pivot)?;
            let provider = provider_by_name(&provider, endpoint.as_deref())?;
            let model = DiscriminatorModel::load(&disc)?;
            let corpus = io::load_lines(&input)?;
            let mut rt_cache = match &cfg.cache_path {
                Some(p) => RoundTripCache::open(p)?,
                None => RoundTripCache::in_memory(),
            };
            let (ds, rt) = run_fdis(provider.as_ref(), &corpus, pivot, &model, &cfg, &mut rt_cache)?;
            io::save_jsonl(&out, &ds)?;
            println!(
                "kept {} of {} round trips ({} skipped, {} provider calls)",
                ds.len(),
                rt.attempted,
                rt.skipped,
                rt.provider_calls
            );
        }
        AugmentCommand::Mtask { m2, annotators, out } => {
            let mode = match annotators {
                Annotators::All => AnnotatorMode::All,
                Annotators::First => AnnotatorMode::First,
            };
            let ds = mtask_from_files(&m2, mode)?;
            io::save_jsonl(&out, &ds)?;
            println!("{} M-Task pairs", ds.len());
        }
    }
    Ok(())
}

fn decode_config(beam: usize, max_len: usize) -> DecodeConfig {
    if beam <= 1 {
        DecodeConfig::greedy(max_len)
    } else {
        DecodeConfig::beam(beam, max_len)
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(b) = a.balance {
        cfg.regime.st_balance = b.into();
    }
    if let Some(s) = a.seed {
        cfg.regime.seed = s;
        cfg.model.seed = s;
    }
    cfg.validate()?;
    if a.regime != RegimeArg::Baseline && a.aug.is_empty() {
        return Err(Error::Contract(
            "this regime needs augmented data; produce it with `fstaug augment` and pass --aug".into(),
        ));
    }
    for p in &a.aug {
        require(p, "augmented dataset")?;
    }
    let swap = |ds: ParallelDataset| {
        if a.reverse {
            ParallelDataset::new(ds.pairs.iter().map(ParallelPair::swapped).collect())
        } else {
            ds
        }
    };
    let original = swap(io::load_dataset(&a.orig)?);
    let parts = a.aug.iter().map(io::load_dataset).collect::<Result<Vec<_>>>()?;
    let mut augmented = swap(ParallelDataset::concat(&parts));
    if a.dedup {
        augmented.dedup();
    }
    let eval_set = a.eval.as_ref().map(io::load_multiref).transpose()?;
    let model = Seq2SeqModel::new(BpeModel::load(&a.bpe)?, cfg.model.clone())?;
    let outputs = TrainOutputs {
        eval_set: eval_set.as_ref(),
        checkpoint_dir: Some(&a.out),
    };
    let (model, log): (Seq2SeqModel, TrainLog) = match a.regime {
        RegimeArg::Ptft => run_ptft(model, &augmented, &original, &cfg.regime, outputs)?,
        RegimeArg::St => run_st(model, &augmented, &original, &cfg.regime, outputs)?,
        RegimeArg::Baseline => run_baseline(model, &original, &cfg.regime, outputs)?,
    };
    let final_path = a.out.join("model.ckpt.json");
    model.save(&final_path)?;
    for end in &log.phase_ends {
        match &end.bleu {
            Some(b) => println!("{}: {} steps, {}", end.phase.name(), end.steps, b.render()),
            None => println!("{}: {} steps", end.phase.name(), end.steps),
        }
    }
    println!("model -> {}", final_path.display());
    Ok(())
}

fn translate(a: &TranslateArgs) -> Result<()> {
    let models = a.model.iter().map(Seq2SeqModel::load).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Seq2SeqModel> = models.iter().collect();
    let sources = io::load_lines(&a.input)?;
    let hyps = decode_batch(&refs, &sources.sentences, &decode_config(a.beam, a.max_len))?;
    io::save_lines(&a.out, &hyps)
}

fn eval(c: EvalCommand) -> Result<()> {
    match c {
        EvalCommand::Bleu {
            hyp,
            refs,
            multiref,
            out,
        } => {
            let hyps = io::load_lines(&hyp)?.sentences;
            let references: Vec<Vec<Sentence>> = match multiref {
                Some(p) => io::load_multiref(&p)?.references(),
                None => {
                    if refs.is_empty() {
                        return Err(Error::Contract("give --refs or --multiref".into()));
                    }
                    let sets = refs.iter().map(io::load_lines).collect::<Result<Vec<_>>>()?;
                    for (p, s) in refs.iter().zip(&sets) {
                        if s.len() != hyps.len() {
                            return Err(Error::Contract(format!(
                                "{} has {} lines, hypotheses have {}",
                                p.display(),
                                s.len(),
                                hyps.len()
                            )));
                        }
                    }
                    (0..hyps.len())
                        .map(|i| sets.iter().map(|s| s.sentences[i].clone()).collect())
                        .collect()
                }
            };
            let report = corpus_bleu(&hyps, &references)?;
            println!("{}", report.render());
            if let Some(o) = out {
                io::write_atomic(&o, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
        }
        EvalCommand::HumanevalBuild {
            src,
            systems,
            n,
            seed,
            out_dir,
        } => {
            let inputs = io::load_lines(&src)?.sentences;
            let mut outputs = BTreeMap::new();
            for spec in &systems {
                let (id, path) = spec
                    .split_once('=')
                    .ok_or_else(|| Error::Contract(format!("--system expects id=path, got `{spec}`")))?;
                let lines = io::load_lines(Path::new(path))?.sentences;
                if outputs.insert(id.to_string(), lines).is_some() {
                    return Err(Error::Contract(format!("system `{id}` given twice")));
                }
            }
            let batch = build_humaneval_batch(&inputs, &outputs, n, seed)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            save_items(out_dir.join("items.json"), &batch.items)?;
            batch.key.save(out_dir.join("key.json"))?;
            println!(
                "{} items -> {}; keep key.json away from annotators",
                batch.items.len(),
                out_dir.join("items.json").display()
            );
        }
        EvalCommand::HumanevalReport {
            ratings,
            key,
            baseline,
            resamples,
            seed,
            out,
        } => {
            require(&ratings, "ratings file")?;
            let store = RatingStore::open(&ratings)?;
            let key = HiddenKey::load(&key)?;
            let report = aggregate_ratings(store.records(), &key, &baseline, resamples, seed)?;
            let text = report.render();
            print!("{text}");
            if let Some(o) = out {
                io::write_atomic(&o, text.as_bytes())?;
            }
        }
    }
    Ok(())
}

fn recipe(a: RecipeArgs) -> Result<()> {
    let name = RecipeName::parse(&a.name)?;
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(o) = a.out_dir {
        cfg.out_dir = o;
    }
    if a.work_dir.is_some() {
        cfg.work_dir = a.work_dir;
    }
    for path in run_recipe(name, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn serve_annotation(a: ServeArgs) -> Result<()> {
    require(&a.items, "items file")?;
    if let Some(d) = &a.ui_dir {
        require(d, "UI directory")?;
    }
    let state = AppState::open(&a.items, &a.ratings)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| Error::Contract(format!("bad listen address: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(Path::new("<runtime>"), e))?;
    rt.block_on(serve(state, addr, a.ui_dir))
        .map_err(|e| Error::io(Path::new(&addr.to_string()), e))
}

fn config(c: ConfigCommand) -> Result<()> {
    match c {
        ConfigCommand::Validate { path, kind } => {
            match kind {
                ConfigKind::Run => RunConfig::load(&path)?.validate()?,
                ConfigKind::Train => load_json::<TrainConfig>(&path)?.validate()?,
            }
            println!("{}: ok", path.display());
        }
        ConfigCommand::Default { kind } => {
            let text = match kind {
                ConfigKind::Run => serde_json::to_string_pretty(&RunConfig::default())?,
                ConfigKind::Train => serde_json::to_string_pretty(&TrainConfig::default())?,
            };
            println!("{text}");
        }
    }
    Ok(())
}
