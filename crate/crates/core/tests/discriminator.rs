use fstaug::discriminator::{train_discriminator, DiscriminatorConfig, DiscriminatorModel};
use fstaug::textdata::synthetic::{generate_labeled, informalize_with};
use fstaug::textdata::{Corpus, Sentence};
use fstaug::tokenizer::{learn_bpe, BpeModel};

fn setup() -> (Vec<(Sentence, bool)>, Vec<(Sentence, bool)>, BpeModel) {
    let train = generate_labeled(11, 400).unwrap();
    let held = generate_labeled(12, 100).unwrap();
    let corpus = Corpus::new("train", train.iter().map(|(s, _)| s.clone()).collect());
    let bpe = learn_bpe(&[&corpus], 300).unwrap();
    (train, held, bpe)
}

fn config() -> DiscriminatorConfig {
    DiscriminatorConfig {
        epochs: 8,
        ..DiscriminatorConfig::default()
    }
}

#[test]
fn separable_corpus_reaches_high_accuracy() {
    let (train, held, bpe) = setup();
    let (model, log) = train_discriminator(&train, &bpe, &config()).unwrap();
    assert_eq!(log.epochs.len(), 8);
    assert!(model.accuracy(&held).unwrap() >= 0.95);

    let mut both = 0;
    for (s, formal) in held.iter().filter(|(_, f)| *f).take(50) {
        assert!(formal);
        let informal = Sentence::new(&informalize_with(s.as_str(), None)).unwrap();
        if model.score(s).unwrap().value() > 0.9 && model.score(&informal).unwrap().value() < 0.1 {
            both += 1;
        }
    }
    assert!(both >= 45, "{both}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("disc.json");
    model.save(&path).unwrap();
    let back = DiscriminatorModel::load(&path).unwrap();
    for (s, _) in held.iter().take(10) {
        assert_eq!(model.score(s).unwrap(), back.score(s).unwrap());
    }
}

#[test]
fn flipped_labels_invert_predictions() {
    let (train, held, bpe) = setup();
    let flipped: Vec<_> = train.into_iter().map(|(s, l)| (s, !l)).collect();
    let (model, _) = train_discriminator(&flipped, &bpe, &config()).unwrap();
    assert!(model.accuracy(&held).unwrap() <= 0.2);
}

#[test]
fn scores_ignore_trailing_whitespace() {
    let (train, _, bpe) = setup();
    let (model, _) = train_discriminator(&train[..40], &bpe, &DiscriminatorConfig { epochs: 1, ..config() }).unwrap();
    let a = Sentence::new("Could you send the report ?").unwrap();
    let b = Sentence::new("Could you send the report ?   ").unwrap();
    assert_eq!(model.score(&a).unwrap(), model.score(&b).unwrap());
}
