//! Acceptance checks. One PASS/FAIL line per criterion; exits nonzero if any fails.
//! Run with `cargo test --release -p fstaug --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fstaug::augment::fdis::{
    filter_scored, run_fdis, FdisConfig, MockProvider, MockStrength, MtProvider, RoundTripCache, RoundTripCandidate,
};
use fstaug::discriminator::{self, train_discriminator, DiscriminatorConfig};
use fstaug::eval::{
    aggregate_ratings, build_humaneval_batch, corpus_bleu, pearson, Correlation, Criterion, RatingRecord,
};
use fstaug::fstmodel;
use fstaug::neural::LrSchedule;
use fstaug::recipes::{median, prepare_base, prepare_desk, table5_desk, train_run, AugSource, DeskConfig, DeskRun, Table5Config};
use fstaug::textdata::synthetic::generate_labeled;
use fstaug::textdata::{apply_edits, io, parse_m2, BalanceMode, Corpus, FormalityScore, Pivot, Sentence};
use fstaug::tokenizer::learn_bpe;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, start: Instant, o: Outcome) -> Outcome {
    let took = start.elapsed();
    let within = took < limit;
    outcome(
        o.pass && within,
        format!("{}; {:.1}s (limit {}s)", o.detail, took.as_secs_f64(), limit.as_secs()),
    )
}

fn s(t: &str) -> Sentence {
    Sentence::new(t).unwrap()
}

// Filter grid: scores i/10 and j/10, thresholds k/10. Kept iff j - i >= k in integers.
fn eq1_filter() -> Outcome {
    let start = Instant::now();
    let mut cands = Vec::new();
    for i in 0..=10u32 {
        for j in 0..=10u32 {
            cands.push(RoundTripCandidate {
                original: s(&format!("orig {i} {j}")),
                rewrite: s(&format!("rewrite {i} {j}")),
                pivot: Pivot::De,
                p_original: FormalityScore::new(f64::from(i) / 10.0).unwrap(),
                p_rewrite: FormalityScore::new(f64::from(j) / 10.0).unwrap(),
            });
        }
    }
    let mut mismatches = 0;
    let mut boundary = 0;
    for k in [0i32, 3, 6, 10] {
        let sigma = f64::from(k) / 10.0;
        let kept: BTreeSet<String> = filter_scored(&cands, sigma)
            .unwrap()
            .pairs
            .iter()
            .map(|p| p.source.as_str().to_string())
            .collect();
        for i in 0..=10i32 {
            for j in 0..=10i32 {
                let expect = j - i >= k;
                if j - i == k {
                    boundary += usize::from(expect);
                }
                if kept.contains(&format!("orig {i} {j}")) != expect {
                    mismatches += 1;
                }
            }
        }
    }
    timed(
        Duration::from_secs(1),
        start,
        outcome(
            mismatches == 0 && boundary > 0,
            format!("{mismatches} mismatches over 484 cases, {boundary} boundary cases kept"),
        ),
    )
}

fn lr_schedule() -> Outcome {
    let sched = LrSchedule::warmup_inverse_sqrt(0.0005, 8000).unwrap();
    let expect = [(1, 6.25e-8), (2000, 1.25e-4), (8000, 5e-4), (32000, 2.5e-4)];
    let mut worst: f64 = 0.0;
    for (step, want) in expect {
        worst = worst.max((sched.lr_at(step).unwrap() - want).abs());
    }
    outcome(worst <= 1e-12, format!("max abs error {worst:.2e} (tolerance 1e-12)"))
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    for seed in 0..20 {
        for (which, (err, name)) in [
            ("discriminator", discriminator::gradient_check_fixture(seed).unwrap()),
            ("seq2seq", fstmodel::gradient_check_fixture(seed).unwrap()),
        ] {
            if err > worst.0 {
                worst = (err, format!("{which} seed {seed} {name}"));
            }
        }
    }
    timed(
        Duration::from_secs(120),
        start,
        outcome(
            worst.0 < 1e-4,
            format!("20 seeds each, worst relative error {:.2e} at {} (tolerance 1e-4)", worst.0, worst.1),
        ),
    )
}

fn discriminator_quality() -> Outcome {
    let start = Instant::now();
    let train = generate_labeled(21, 1000).unwrap();
    let held = generate_labeled(22, 250).unwrap();
    let corpus = Corpus::new("train", train.iter().map(|(s, _)| s.clone()).collect());
    let bpe = learn_bpe(&[&corpus], 400).unwrap();
    let (model, _) = train_discriminator(&train, &bpe, &DiscriminatorConfig::default()).unwrap();
    let acc = model.accuracy(&held).unwrap();
    timed(
        Duration::from_secs(300),
        start,
        outcome(
            acc >= 0.95,
            format!("{}/{} split, held-out accuracy {acc:.4} (need >= 0.95)", train.len(), held.len()),
        ),
    )
}

// Brute-force BLEU over whitespace tokens: count every n-gram by scanning.
fn oracle_bleu(hyps: &[Vec<&str>], refs: &[Vec<Vec<&str>>]) -> f64 {
    let count = |seq: &[&str], gram: &[&str]| seq.windows(gram.len()).filter(|w| *w == gram).count();
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (mut matched, mut total) = (0usize, 0usize);
        for (h, rs) in hyps.iter().zip(refs) {
            if h.len() < n {
                continue;
            }
            total += h.len() - n + 1;
            let mut done: Vec<&[&str]> = Vec::new();
            for gram in h.windows(n) {
                if done.contains(&gram) {
                    continue;
                }
                done.push(gram);
                let max_ref = rs.iter().map(|r| count(r, gram)).max().unwrap_or(0);
                matched += count(h, gram).min(max_ref);
            }
        }
        if matched == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let c: usize = hyps.iter().map(Vec::len).sum();
    let mut r = 0;
    for (h, rs) in hyps.iter().zip(refs) {
        let mut best = usize::MAX;
        let mut best_gap = usize::MAX;
        for len in rs.iter().map(Vec::len) {
            let gap = len.abs_diff(h.len());
            if gap < best_gap || (gap == best_gap && len < best) {
                best = len;
                best_gap = gap;
            }
        }
        r += best;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * (log_sum / 4.0).exp()
}

fn bleu_oracle() -> Outcome {
    const WORDS: [&str; 8] = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    for _ in 0..20 {
        let n_sent = rng.gen_range(1..=4);
        let mut hyps = Vec::new();
        let mut refs = Vec::new();
        for _ in 0..n_sent {
            let rs: Vec<Vec<&str>> = (0..4)
                .map(|_| (0..rng.gen_range(4..10)).map(|_| WORDS[rng.gen_range(0..4)]).collect())
                .collect();
            let mut h = rs[0].clone();
            for w in h.iter_mut() {
                if rng.gen_bool(0.25) {
                    *w = WORDS[rng.gen_range(0..WORDS.len())];
                }
            }
            if rng.gen_bool(0.3) {
                h.pop();
            }
            hyps.push(h);
            refs.push(rs);
        }
        let want = oracle_bleu(&hyps, &refs);
        nonzero += usize::from(want > 0.0);
        let to_s = |v: &Vec<&str>| s(&v.join(" "));
        let got = corpus_bleu(
            &hyps.iter().map(to_s).collect::<Vec<_>>(),
            &refs.iter().map(|rs| rs.iter().map(to_s).collect()).collect::<Vec<_>>(),
        )
        .unwrap()
        .score;
        worst = worst.max((got - want).abs());
    }
    let same = vec![s("Could you send me the report ?"), s("I will be there at noon .")];
    let refs: Vec<Vec<Sentence>> = same
        .iter()
        .map(|h| vec![h.clone(), s("something else entirely"), s("no"), s("maybe later then")])
        .collect();
    let identical = corpus_bleu(&same, &refs).unwrap().score;
    outcome(
        worst <= 1e-9 && identical == 100.0,
        format!("20 corpora ({nonzero} nonzero), max |diff| {worst:.2e} (tolerance 1e-9); identical corpus {identical}"),
    )
}

const M2_FIXTURES: [(&str, &str, u32, Option<&str>); 10] = [
    ("substitution", "S He go to school .\nA 1 2|||R:VERB:SVA|||goes|||REQUIRED|||-NONE-|||0\n", 0, Some("He goes to school .")),
    ("deletion", "S I am very very happy .\nA 2 3|||U:ADV|||-NONE-|||REQUIRED|||-NONE-|||0\n", 0, Some("I am very happy .")),
    ("insertion", "S She likes apples .\nA 2 2|||M:DET|||the|||REQUIRED|||-NONE-|||0\n", 0, Some("She likes the apples .")),
    (
        "multi-edit",
        "S he have a apple\nA 0 1|||R:ORTH|||He|||REQUIRED|||-NONE-|||0\nA 1 2|||R:VERB:SVA|||has|||REQUIRED|||-NONE-|||0\nA 2 3|||R:DET|||an|||REQUIRED|||-NONE-|||0\n",
        0,
        Some("He has an apple"),
    ),
    (
        "multi-annotator, first",
        "S This are good .\nA 1 2|||R:VERB|||is|||REQUIRED|||-NONE-|||0\nA 0 2|||R:OTHER|||These were|||REQUIRED|||-NONE-|||1\n",
        0,
        Some("This is good ."),
    ),
    (
        "multi-annotator, second",
        "S This are good .\nA 1 2|||R:VERB|||is|||REQUIRED|||-NONE-|||0\nA 0 2|||R:OTHER|||These were|||REQUIRED|||-NONE-|||1\n",
        1,
        Some("These were good ."),
    ),
    ("noop", "S All is well .\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n", 0, None),
    ("span to phrase", "S I want go home .\nA 1 3|||R:VERB|||want to go|||REQUIRED|||-NONE-|||0\n", 0, Some("I want to go home .")),
    ("insertion at end", "S We arrived yesterday\nA 3 3|||M:PUNCT|||.|||REQUIRED|||-NONE-|||0\n", 0, Some("We arrived yesterday .")),
    (
        "deletion then substitution",
        "S Well i think so .\nA 0 1|||U:OTHER||||||REQUIRED|||-NONE-|||0\nA 1 2|||R:ORTH|||I|||REQUIRED|||-NONE-|||0\n",
        0,
        Some("I think so ."),
    ),
];

fn m2_fixtures() -> Outcome {
    let mut bad = Vec::new();
    for (name, text, annotator, want) in M2_FIXTURES {
        let got = parse_m2(text)
            .ok()
            .and_then(|r| r.into_iter().next())
            .map(|rec| apply_edits(&rec, annotator).map(|p| p.target.as_str().to_string()));
        if got != Some(want.map(str::to_string)) {
            bad.push(format!("{name}: got {got:?}"));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() { "10/10 fixtures exact".to_string() } else { bad.join("; ") },
    )
}

fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn pearson_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let n = 3 + k;
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..3u8))).collect();
        let mut y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
        y[0] += 0.5;
        let x = if x.iter().all(|v| *v == x[0]) { (0..n).map(|i| i as f64).collect() } else { x };
        worst = worst.max((pearson(&x, &y).unwrap() - pearson_direct(&x, &y)).abs());
    }
    let x = [0.5, 1.0, 2.0, 4.5];
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let same = pearson(&x, &x).unwrap();
    let opposite = pearson(&x, &neg).unwrap();
    let flat = pearson(&x, &[1.0; 4]).is_err();
    outcome(
        worst <= 1e-9 && (same - 1.0).abs() <= 1e-12 && (opposite + 1.0).abs() <= 1e-12 && flat,
        format!("10 pairs max |diff| {worst:.2e} (tolerance 1e-9); x=y {same}; y=-x {opposite}; zero variance is error: {flat}"),
    )
}

// Per-item scores by system for each annotator: (formality, fluency, meaning).
const HE_SYSTEMS: [&str; 4] = ["base", "sys1", "sys2", "copy"];
const HE_A: [(u8, u8, u8); 4] = [(0, 1, 2), (1, 2, 2), (2, 2, 1), (0, 1, 2)];
const HE_B: [(u8, u8, u8); 4] = [(0, 1, 2), (1, 2, 1), (1, 2, 1), (0, 1, 2)];

fn humaneval_plumbing() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let inputs: Vec<Sentence> = (0..400).map(|i| s(&format!("input number {i}"))).collect();
    let outputs: BTreeMap<String, Vec<Sentence>> = HE_SYSTEMS
        .iter()
        .map(|sys| (sys.to_string(), (0..400).map(|i| s(&format!("{sys} says {i}"))).collect()))
        .collect();
    let a = build_humaneval_batch(&inputs, &outputs, 300, 11).unwrap();
    let b = build_humaneval_batch(&inputs, &outputs, 300, 11).unwrap();
    let c = build_humaneval_batch(&inputs, &outputs, 300, 12).unwrap();
    let deterministic = a == b && a.items != c.items && a.items.len() == 300;
    ok &= deterministic;
    notes.push(format!("n={} deterministic per seed: {deterministic}", a.items.len()));

    let dir = tempfile::tempdir().unwrap();
    let items_path = dir.path().join("items.json");
    fstaug::eval::save_items(&items_path, &a.items).unwrap();
    let text = std::fs::read_to_string(&items_path).unwrap();
    let leaks = HE_SYSTEMS.iter().any(|sys| text.contains(&format!("\"{sys}\"")))
        || text.contains("system")
        || a.items.iter().any(|it| it.outputs.iter().map(|o| o.display_index).collect::<BTreeSet<_>>().len() != 4);
    ok &= !leaks;
    notes.push(format!("items free of system ids: {}", !leaks));

    let mut records = Vec::new();
    for item in &a.items {
        for d in 0..4 {
            let sys = a.key.system(item.id, d).unwrap();
            let k = HE_SYSTEMS.iter().position(|x| *x == sys).unwrap();
            for (ann, table) in [("ann1", HE_A), ("ann2", HE_B)] {
                let (f, fl, m) = table[k];
                records.push(RatingRecord {
                    annotator: ann.into(),
                    item: item.id,
                    display_index: d,
                    formality: f,
                    fluency: fl,
                    meaning: m,
                });
            }
        }
    }
    let report = aggregate_ratings(&records, &a.key, "base", 10_000, 3).unwrap();
    // means are the average of the two annotators' constant per-system scores
    let want_means: [(&str, [f64; 3]); 4] = [
        ("base", [0.0, 1.0, 2.0]),
        ("sys1", [1.0, 2.0, 1.5]),
        ("sys2", [1.5, 2.0, 1.0]),
        ("copy", [0.0, 1.0, 2.0]),
    ];
    let mut mean_err: f64 = 0.0;
    for (sys, want) in want_means {
        let got = report.system(sys).unwrap();
        for (c, w) in Criterion::ALL.iter().zip(want) {
            mean_err = mean_err.max((got.mean(*c) - w).abs());
        }
    }
    ok &= mean_err <= 1e-12;
    notes.push(format!("means max |diff| {mean_err:.1e}"));

    // x, y per item over the four systems; every item repeats the pattern
    let hand = [
        1.5 / 2.75f64.sqrt(), // formality (0,1,2,0) vs (0,1,1,0)
        1.0,                  // fluency identical
        0.5 / 0.75f64.sqrt(), // meaning (2,2,1,2) vs (2,1,1,2)
    ];
    let agr = report.agreement.as_ref().unwrap();
    let got = [&agr.pearson_formality, &agr.pearson_fluency, &agr.pearson_meaning];
    let mut r_err: f64 = 0.0;
    for (g, h) in got.iter().zip(hand) {
        r_err = r_err.max(match g {
            Correlation::Value(v) => (v - h).abs(),
            Correlation::Undefined(_) => f64::INFINITY,
        });
    }
    ok &= r_err <= 1e-9;
    notes.push(format!("Pearson max |diff| {r_err:.1e}"));

    let copy = report.system("copy").unwrap();
    let self_p: Vec<f64> = Criterion::ALL.iter().map(|c| copy.p_value(*c)).collect();
    let sys1_p = report.system("sys1").unwrap().p_formality;
    ok &= self_p.iter().all(|p| *p == 1.0) && sys1_p < 0.05;
    notes.push(format!("identical system p = {self_p:?}, sys1 formality p = {sys1_p}"));
    outcome(ok, notes.join("; "))
}

struct Counting<'a> {
    inner: &'a dyn MtProvider,
    calls: AtomicUsize,
}

impl MtProvider for Counting<'_> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn translate(&self, texts: &[String], from: &str, to: &str) -> fstaug::Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.translate(texts, from, to)
    }
}

fn fdis_cache(config: &DeskConfig) -> Outcome {
    let base = prepare_base(config, 1).unwrap();
    let corpus = Corpus::new(
        "informal",
        base.corpus.informal_mono.sentences.iter().take(500).cloned().collect(),
    );
    let dir = tempfile::tempdir().unwrap();
    let cache_path = dir.path().join("rt.cache");
    let mock = MockProvider::new(MockStrength::Medium);
    let fdis = FdisConfig::default();
    let mut calls = Vec::new();
    let mut files = Vec::new();
    for run in 0..2 {
        let provider = Counting {
            inner: &mock,
            calls: AtomicUsize::new(0),
        };
        let mut cache = RoundTripCache::open(&cache_path).unwrap();
        let (ds, rt) = run_fdis(&provider, &corpus, Pivot::MockMedium, &base.discriminator, &fdis, &mut cache).unwrap();
        let out = dir.path().join(format!("fdis{run}.jsonl"));
        io::save_jsonl(&out, &ds).unwrap();
        calls.push((provider.calls.load(Ordering::SeqCst), rt.provider_calls, ds.len()));
        files.push(std::fs::read(&out).unwrap());
    }
    let pass = calls[0].0 > 0 && calls[1].0 == 0 && calls[1].1 == 0 && files[0] == files[1];
    outcome(
        pass,
        format!(
            "first run {} calls, second run {} calls ({} reported); {} pairs; byte-identical: {}",
            calls[0].0,
            calls[1].0,
            calls[1].1,
            calls[1].2,
            files[0] == files[1]
        ),
    )
}

fn table5(config: &DeskConfig) -> Outcome {
    let start = Instant::now();
    let report = table5_desk(config, &Table5Config::default(), 1).unwrap();
    let kept = |p: Pivot| report.rows.iter().find(|r| r.pivot == p).map_or(0, |r| r.kept);
    let (strong, medium, weak) = (kept(Pivot::MockStrong), kept(Pivot::MockMedium), kept(Pivot::MockWeak));
    print!("{}", report.render());
    timed(
        Duration::from_secs(300),
        start,
        outcome(
            strong > medium && medium > weak,
            format!("accepted pairs strong {strong} > medium {medium} > weak {weak} (1000 sentences, sigma 0.6)"),
        ),
    )
}

const TABLE1_RUNS: [DeskRun; 5] = [
    DeskRun::Original,
    DeskRun::St(BalanceMode::None),
    DeskRun::St(BalanceMode::UpSample),
    DeskRun::St(BalanceMode::DownSample),
    DeskRun::Ptft(AugSource::Combined),
];
const TABLE2_EXTRA: [DeskRun; 3] = [
    DeskRun::Ptft(AugSource::Bt),
    DeskRun::Ptft(AugSource::Fdis),
    DeskRun::Ptft(AugSource::Mtask),
];

fn desk_tables(config: &DeskConfig) -> (Outcome, Outcome) {
    let seeds = [1u64, 2, 3];
    let mut bleu: BTreeMap<DeskRun, Vec<f64>> = BTreeMap::new();
    let mut table1_time = Duration::ZERO;
    let mut table2_time = Duration::ZERO;
    let mut aug_sizes = Vec::new();
    for seed in seeds {
        let t = Instant::now();
        let data = prepare_desk(config, seed).unwrap();
        let prep = t.elapsed();
        table1_time += prep;
        table2_time += prep;
        aug_sizes.push(data.combined().len());
        for run in TABLE1_RUNS.iter().chain(&TABLE2_EXTRA) {
            let t = Instant::now();
            let (_, log) = train_run(config, &data, *run, None).unwrap();
            let score = log.final_bleu().unwrap();
            if TABLE1_RUNS.contains(run) {
                table1_time += t.elapsed();
            }
            if matches!(run, DeskRun::Original | DeskRun::Ptft(_)) {
                table2_time += t.elapsed();
            }
            println!("  seed {seed} {:<14} BLEU {score:.2}", run.slug());
            bleu.entry(*run).or_default().push(score);
        }
    }
    let med = |r: DeskRun| median(&bleu[&r]);
    let fmt = |r: DeskRun| format!("{} {:.2}", r.slug(), med(r));

    let orig = med(DeskRun::Original);
    let ptft = med(DeskRun::Ptft(AugSource::Combined));
    let st = med(DeskRun::St(BalanceMode::None));
    let t1_pass = ptft >= orig && ptft > st && table1_time < Duration::from_secs(1800);
    let t1 = outcome(
        t1_pass,
        format!(
            "medians over seeds 1-3: {}; need PT&FT >= original and PT&FT > ST(none); augmented pairs {:?}; {:.0}s (limit 1800s)",
            TABLE1_RUNS.map(fmt).join(", "),
            aug_sizes,
            table1_time.as_secs_f64()
        ),
    );

    let singles = TABLE2_EXTRA.map(med);
    let best_single = singles.iter().cloned().fold(f64::MIN, f64::max);
    let t2_pass = singles.iter().all(|m| *m > orig) && ptft >= best_single - 0.5;
    let t2 = outcome(
        t2_pass,
        format!(
            "medians: {}, {}, combined {ptft:.2}; each single > original, combined >= best single {best_single:.2} - 0.5; {:.0}s",
            fmt(DeskRun::Original),
            TABLE2_EXTRA.map(fmt).join(", "),
            table2_time.as_secs_f64()
        ),
    );
    (t1, t2)
}

fn main() {
    let config = DeskConfig::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut check = |name: &'static str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };
    check("filter threshold exactness", eq1_filter());
    check("learning-rate schedule", lr_schedule());
    check("gradient checks", gradient_checks());
    check("discriminator quality", discriminator_quality());
    check("BLEU oracle equivalence", bleu_oracle());
    check("M2 correctness", m2_fixtures());
    check("Pearson oracle", pearson_oracle());
    check("human-eval plumbing", humaneval_plumbing());
    check("F-Dis cache", fdis_cache(&config));
    check("provider strength ordering", table5(&config));
    let (t1, t2) = desk_tables(&config);
    check("regime ordering at desk scale", t1);
    check("augmentation sources at desk scale", t2);

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("\n{} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
