use fstaug::augment::bt::{generate_bt_pairs, train_bt_model, BtConfig};
use fstaug::fstmodel::{DecodeConfig, Seq2SeqConfig, Seq2SeqModel};
use fstaug::neural::LrSchedule;
use fstaug::textdata::{Corpus, MultiRefTestSet, ParallelDataset, ParallelPair, Provenance, Sentence};
use fstaug::tokenizer::{learn_bpe, BpeModel};
use fstaug::trainer::{run_baseline, run_ptft, run_st, Phase, RegimeKind, TrainOutputs, TrainingRegime};

const PAIRS: [(&str, &str); 4] = [
    ("plz send it", "Please send it ."),
    ("thx a lot", "Thank you very much ."),
    ("u r late", "You are late ."),
    ("gonna call u", "I am going to call you ."),
];

fn s(t: &str) -> Sentence {
    Sentence::new(t).unwrap()
}

fn dataset(prov: Provenance) -> ParallelDataset {
    ParallelDataset::new(
        PAIRS
            .iter()
            .map(|(a, b)| ParallelPair::new(s(a), s(b), prov).unwrap())
            .collect(),
    )
}

fn bpe() -> BpeModel {
    let lines: Vec<&str> = PAIRS.iter().flat_map(|(a, b)| [*a, *b]).collect();
    learn_bpe(&[&Corpus::from_strs("t", &lines).unwrap()], 40).unwrap()
}

fn model(seed: u64) -> Seq2SeqModel {
    let config = Seq2SeqConfig {
        embed_dim: 8,
        hidden_dim: 12,
        attn_dim: 6,
        max_len: 40,
        clip_norm: 5.0,
        seed,
    };
    Seq2SeqModel::new(bpe(), config).unwrap()
}

fn regime(kind: RegimeKind) -> TrainingRegime {
    TrainingRegime {
        kind,
        pretrain_steps: 30,
        finetune_steps: 10,
        pretrain_schedule: LrSchedule::warmup_inverse_sqrt(0.01, 10).unwrap(),
        finetune_lr: 0.002,
        batch_size: 3,
        eval_decode: DecodeConfig::greedy(20),
        ..TrainingRegime::desk_ptft()
    }
}

fn test_set() -> MultiRefTestSet {
    let text: String = PAIRS.iter().map(|(a, b)| format!("{a}\t{b}\t{b}\t{b}\t{b}\n")).collect();
    fstaug::textdata::io::parse_multiref(&text).unwrap()
}

#[test]
fn ptft_logs_both_schedules() {
    let r = regime(RegimeKind::Ptft);
    let (_, log) = run_ptft(model(1), &dataset(Provenance::Bt), &dataset(Provenance::Original), &r, TrainOutputs::default()).unwrap();
    assert_eq!(log.entries.len() as u64, r.total_steps());
    let pre: Vec<_> = log.phase_entries(Phase::Pretrain).collect();
    let fine: Vec<_> = log.phase_entries(Phase::Finetune).collect();
    assert_eq!((pre.len(), fine.len()), (30, 10));
    assert!((pre[9].lr - 0.01).abs() < 1e-15, "{}", pre[9].lr);
    assert!((pre[0].lr - 0.001).abs() < 1e-15);
    assert!((pre[29].lr - 0.01 * (10.0f64 / 30.0).sqrt()).abs() < 1e-15);
    assert!(fine.iter().all(|e| e.lr == 0.002));
    assert_eq!(fine[0].step, 1);
    assert!(log.final_bleu().is_none());
}

#[test]
fn st_and_baseline_use_the_full_budget() {
    let r = regime(RegimeKind::St);
    let (_, log) = run_st(model(1), &dataset(Provenance::Bt), &dataset(Provenance::Original), &r, TrainOutputs::default()).unwrap();
    assert_eq!(log.phase_entries(Phase::Joint).count(), 40);
    let (_, log) = run_baseline(model(1), &dataset(Provenance::Original), &r, TrainOutputs::default()).unwrap();
    assert_eq!(log.phase_entries(Phase::Baseline).count(), 40);
    assert_eq!(log.phase_ends.len(), 1);
}

#[test]
fn finetune_refuses_augmented_pairs() {
    let r = regime(RegimeKind::Ptft);
    let mut original = dataset(Provenance::Original);
    original.pairs.push(ParallelPair::new(s("ok then"), s("Very well ."), Provenance::Bt).unwrap());
    let err = run_ptft(model(1), &dataset(Provenance::Bt), &original, &r, TrainOutputs::default())
        .unwrap_err()
        .to_string();
    assert!(err.contains("finetune phase sampled a bt pair"), "{err}");
}

#[test]
fn same_seed_gives_identical_runs() {
    let r = regime(RegimeKind::Ptft);
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let set = test_set();
        let outputs = TrainOutputs {
            eval_set: Some(&set),
            checkpoint_dir: Some(&out),
        };
        let (_, log) = run_ptft(model(7), &dataset(Provenance::Bt), &dataset(Provenance::Original), &r, outputs).unwrap();
        (log, std::fs::read(out.join("finetune.ckpt.json")).unwrap())
    };
    let (log_a, ckpt_a) = run("a");
    let (log_b, ckpt_b) = run("b");
    assert_eq!(ckpt_a, ckpt_b);
    let losses = |l: &fstaug::trainer::TrainLog| l.entries.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
    assert_eq!(losses(&log_a), losses(&log_b));
    assert_eq!(log_a.final_bleu(), log_b.final_bleu());
    assert!(dir.path().join("a/pretrain.ckpt.json").exists());
    assert!(dir.path().join("a/train_log.json").exists());
}

#[test]
fn bt_model_learns_the_reverse_direction() {
    let config = BtConfig {
        model: model(3).config.clone(),
        train_steps: 400,
        schedule: LrSchedule::constant(0.02).unwrap(),
        batch_size: 4,
        decode: DecodeConfig::greedy(20),
        ..BtConfig::default()
    };
    let (bt, _) = train_bt_model(&dataset(Provenance::Original), bpe(), &config).unwrap();
    let formal = Corpus::from_strs("f", &PAIRS.map(|(_, b)| b)).unwrap();
    let generated = generate_bt_pairs(&bt, &formal, &config).unwrap();
    assert_eq!(generated.len(), PAIRS.len());
    for (pair, (informal, formal)) in generated.pairs.iter().zip(PAIRS) {
        assert_eq!(pair.provenance(), Provenance::Bt);
        assert_eq!(pair.source.as_str(), informal);
        assert_eq!(pair.target.as_str(), formal);
    }
}
