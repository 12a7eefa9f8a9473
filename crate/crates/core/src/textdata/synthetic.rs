//! Rule-based desk-scale formality corpus.
//!
//! Formal sentences come from a fixed template grammar whose slots are filled
//! from a Zipf-weighted lexicon, so that the rare fillers are mostly absent
//! from a small parallel split. Informal counterparts are derived by a fixed
//! rule table (see [`informalize`]). Everything is a pure function of the
//! seed.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::m2::{Edit, M2Record};
use super::{Corpus, MultiRefItem, MultiRefTestSet, ParallelDataset, ParallelPair, Sentence};
use crate::error::{ensure, Result};

/// Word substitutions applied after lowercasing.
pub const WORD_MAP: [(&str, &str); 6] = [
    ("you", "u"),
    ("are", "r"),
    ("because", "cuz"),
    ("to", "2"),
    ("your", "ur"),
    ("please", "plz"),
];

pub const FILLERS: [&str; 3] = ["lol", "btw", "imo"];
pub const FILLER_PROBABILITY: f64 = 0.3;

/// First words that make a template a question.
pub const QUESTION_STARTERS: [&str; 7] = ["are", "could", "do", "did", "where", "can", "would"];

pub const TEMPLATES: [&str; 26] = [
    "Please send the {noun} to me.",
    "Are you going to the {place} {time}?",
    "I think your {noun} is very {adj}.",
    "{name} is coming to the {place} because it is {adj}.",
    "Could you please call {name} {time}?",
    "I do not like the {noun} because it is {adj}.",
    "You are welcome to visit {name} at the {place}.",
    "Do you know where {name} put the {noun}?",
    "I would like to {verb} the {noun} with you.",
    "Your {noun} looks {adj} {time}.",
    "Please tell {name} that the {noun} is ready.",
    "We are planning to {verb} the {noun} {time}.",
    "I believe {name} is right about the {noun}.",
    "Did you {verb} the {noun} yet?",
    "{name} and I went to the {place} {time}.",
    "It is {adj} because {name} said so.",
    "Are your friends coming to the {place}?",
    "I am not sure why {name} wants to {verb} the {noun}.",
    "Please do not forget your {noun}.",
    "You should ask {name} about the {noun}.",
    "Where are you going with the {noun}?",
    "I really enjoyed the {adj} {noun} at the {place}.",
    "Thank you for the {adj} {noun}.",
    "{name} wants to know if you are {adj}.",
    "Can you help {name} {verb} the {noun}?",
    "Would you like to meet {name} at the {place}?",
];

/// Templates for the synthetic GEC corpus. They share the lexicon with the
/// formality templates but not the sentence shapes.
pub const GEC_TEMPLATES: [&str; 12] = [
    "{name} goes to the {place} every day.",
    "The {noun} on the table belongs to {name}.",
    "I bought a {adj} {noun} for {name}.",
    "{name} has finished the {noun} already.",
    "My brother wants to {verb} the {noun}.",
    "The {place} was very {adj} {time}.",
    "I met {name} near the {place}.",
    "{name} forgot the {noun} at the {place}.",
    "The teacher asked {name} to {verb} the {noun}.",
    "I have never seen such a {adj} {noun}.",
    "{name} told me that the {place} is {adj}.",
    "We will {verb} the {noun} after lunch.",
];

pub const NAMES: [&str; 96] = [
    "John", "Mary", "Alice", "Robert", "Linda", "Michael", "Sarah", "David", "Emma", "James",
    "Olivia", "William", "Sophia", "Daniel", "Grace", "Thomas", "Laura", "Peter", "Helen",
    "Kevin", "Nancy", "Brian", "Karen", "George", "Julia", "Steven", "Rachel", "Edward", "Diana",
    "Frank", "Monica", "Henry", "Bella", "Oscar", "Fiona", "Victor", "Irene", "Walter", "Clara",
    "Arthur", "Nora", "Simon", "Paula", "Martin", "Vera", "Philip", "Stella", "Gordon", "Ruth",
    "Harold", "Agnes", "Felix", "Lucy", "Rupert", "Tessa", "Ivan", "Greta", "Boris", "Hilda",
    "Conrad", "Ingrid", "Dexter", "Mabel", "Ernest", "Yvonne", "Gilbert", "Maxine", "Leopold",
    "Doris", "Quentin", "Beatrice", "Horace", "Lorna", "Ambrose", "Priscilla", "Cedric",
    "Winifred", "Barnaby", "Esther", "Ignatius", "Rosalind", "Lysander", "Ophelia", "Thaddeus",
    "Gwendolyn", "Montague", "Henrietta", "Percival", "Millicent", "Archibald", "Imogen",
    "Bartholomew", "Clementine", "Fitzgerald", "Philippa", "Reginald",
];

pub const NOUNS: [&str; 72] = [
    "report", "book", "car", "movie", "song", "letter", "phone", "ticket", "dress", "computer",
    "picture", "guitar", "camera", "present", "message", "recipe", "painting", "jacket",
    "bicycle", "contract", "album", "lamp", "umbrella", "sandwich", "necklace", "schedule",
    "backpack", "invoice", "blanket", "telescope", "sculpture", "keyboard", "manuscript",
    "passport", "wallet", "notebook", "trophy", "helmet", "violin", "kettle", "mirror",
    "brochure", "carpet", "diamond", "envelope", "furniture", "garden", "harmonica", "ladder",
    "magazine", "napkin", "orchestra", "pamphlet", "quilt", "radiator", "saxophone", "tapestry",
    "uniform", "vase", "wardrobe", "xylophone", "yacht", "zeppelin", "accordion", "binoculars",
    "chandelier", "dictionary", "encyclopedia", "fountain", "gazebo", "hammock", "igloo",
];

pub const ADJECTIVES: [&str; 36] = [
    "good", "nice", "great", "new", "beautiful", "expensive", "interesting", "strange", "old",
    "small", "wonderful", "terrible", "boring", "amazing", "useful", "heavy", "colorful",
    "elegant", "fragile", "gigantic", "hilarious", "impressive", "luxurious", "magnificent",
    "mysterious", "peculiar", "remarkable", "spectacular", "tremendous", "unusual", "vibrant",
    "whimsical", "delightful", "extraordinary", "fascinating", "glamorous",
];

pub const VERBS: [&str; 30] = [
    "see", "buy", "fix", "read", "find", "move", "clean", "check", "sell", "paint", "borrow",
    "return", "deliver", "inspect", "organize", "polish", "repair", "replace", "rearrange",
    "photograph", "decorate", "assemble", "examine", "measure", "transport", "evaluate",
    "celebrate", "investigate", "restore", "wrap",
];

pub const PLACES: [&str; 30] = [
    "party", "office", "park", "library", "concert", "beach", "museum", "station", "market",
    "school", "theater", "restaurant", "airport", "hospital", "stadium", "bakery", "gallery",
    "harbor", "cathedral", "pharmacy", "laboratory", "conference", "exhibition", "festival",
    "auditorium", "boutique", "observatory", "planetarium", "warehouse", "aquarium",
];

pub const TIMES: [&str; 14] = [
    "today", "tomorrow", "tonight", "next week", "this weekend", "on Monday", "on Tuesday",
    "on Wednesday", "on Thursday", "on Friday", "on Saturday", "on Sunday", "in January",
    "in September",
];

/// Reference variants: each substitution may appear in the alternative
/// references of a test item.
const PARAPHRASES: [(&str, &str); 8] = [
    ("very", "really"),
    ("think", "believe"),
    ("good", "fine"),
    ("like", "love"),
    ("call", "phone"),
    ("ask", "contact"),
    ("forget", "misplace"),
    ("help", "assist"),
];

const ZIPF_EXPONENT: f64 = 1.1;

/// Words that keep their capitalization in formal text.
pub fn proper_words() -> impl Iterator<Item = &'static str> {
    NAMES.iter().copied().chain(
        TIMES
            .iter()
            .flat_map(|t| t.split(' '))
            .filter(|w| w.chars().next().is_some_and(char::is_uppercase)),
    )
}

struct Lexicon {
    slots: Vec<(&'static str, &'static [&'static str], WeightedIndex<f64>)>,
}

impl Lexicon {
    fn new() -> Self {
        let zipf = |n: usize| {
            WeightedIndex::new((0..n).map(|r| 1.0 / ((r + 1) as f64).powf(ZIPF_EXPONENT)))
                .expect("non-empty lexicon")
        };
        let slot = |name, words: &'static [&'static str]| (name, words, zipf(words.len()));
        Lexicon {
            slots: vec![
                slot("{name}", &NAMES),
                slot("{noun}", &NOUNS),
                slot("{adj}", &ADJECTIVES),
                slot("{verb}", &VERBS),
                slot("{place}", &PLACES),
                slot("{time}", &TIMES),
            ],
        }
    }

    fn fill(&self, template: &str, rng: &mut ChaCha8Rng) -> String {
        let mut out = template.to_string();
        for (slot, words, dist) in &self.slots {
            while let Some(pos) = out.find(slot) {
                let word = words[dist.sample(rng)];
                out.replace_range(pos..pos + slot.len(), word);
            }
        }
        out
    }
}

fn draw_formal(lex: &Lexicon, templates: &[&str], rng: &mut ChaCha8Rng) -> String {
    let template = templates.choose(rng).expect("templates");
    capitalize_first(&lex.fill(template, rng))
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Applies the informalization rules with a fixed filler choice: lowercase,
/// drop terminal punctuation, map words, then append `filler` if given.
pub fn informalize_with(formal: &str, filler: Option<&str>) -> String {
    let trimmed = formal.trim_end_matches(['.', '?', '!']);
    let lowered = trimmed.to_lowercase();
    let mut words: Vec<&str> = lowered
        .split_whitespace()
        .map(|w| {
            WORD_MAP
                .iter()
                .find(|(from, _)| *from == w)
                .map_or(w, |(_, to)| to)
        })
        .collect();
    if let Some(f) = filler {
        words.push(f);
    }
    words.join(" ")
}

/// Informalizes `formal`, drawing the optional filler from `rng`.
pub fn informalize(formal: &str, rng: &mut impl Rng) -> String {
    let filler = if rng.gen_bool(FILLER_PROBABILITY) {
        Some(*FILLERS.choose(rng).expect("fillers"))
    } else {
        None
    };
    informalize_with(formal, filler)
}

/// One place where the inverse rule table could act on an informal sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestoreSite {
    /// Undo a word substitution (or restore a proper-noun capital) at a word index.
    Word(usize),
    DropFiller,
    CapitalizeFirst,
    TerminalPunctuation,
}

/// Inverts the informalization rules. `apply` decides, per site, whether the
/// rule fires; always returning `true` gives the full inverse.
pub fn restore(informal: &str, mut apply: impl FnMut(RestoreSite) -> bool) -> String {
    let mut words: Vec<String> = informal.split_whitespace().map(str::to_string).collect();
    if words.len() > 1
        && FILLERS.contains(&words[words.len() - 1].as_str())
        && apply(RestoreSite::DropFiller)
    {
        words.pop();
    }
    let proper: Vec<&str> = proper_words().collect();
    for (i, w) in words.iter_mut().enumerate() {
        let replacement = if let Some((from, _)) = WORD_MAP.iter().find(|(_, to)| to == w) {
            Some(from.to_string())
        } else if w == "i" {
            Some("I".to_string())
        } else {
            proper
                .iter()
                .find(|p| p.to_lowercase() == *w)
                .map(|p| p.to_string())
        };
        if let Some(r) = replacement {
            if apply(RestoreSite::Word(i)) {
                *w = r;
            }
        }
    }
    let question = words
        .first()
        .is_some_and(|w| QUESTION_STARTERS.contains(&w.to_lowercase().as_str()));
    if let Some(first) = words.first_mut() {
        if first.chars().next().is_some_and(char::is_lowercase) && apply(RestoreSite::CapitalizeFirst)
        {
            *first = capitalize_first(first);
        }
    }
    let mut out = words.join(" ");
    if !out.ends_with(['.', '?', '!']) && apply(RestoreSite::TerminalPunctuation) {
        out.push(if question { '?' } else { '.' });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub parallel: usize,
    pub formal_mono: usize,
    pub informal_mono: usize,
}

impl SyntheticConfig {
    /// `n` parallel pairs and four times as many sentences in each monolingual split.
    pub fn new(n: usize) -> Self {
        SyntheticConfig {
            parallel: n,
            formal_mono: 4 * n,
            informal_mono: 4 * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFst {
    /// Informal source, formal target.
    pub parallel: ParallelDataset,
    pub formal_mono: Corpus,
    pub informal_mono: Corpus,
}

// Independent ChaCha streams per split.
const STREAM_PARALLEL: u64 = 1;
const STREAM_FORMAL_MONO: u64 = 2;
const STREAM_INFORMAL_MONO: u64 = 3;
const STREAM_TEST: u64 = 4;
const STREAM_GEC: u64 = 5;
const STREAM_LABELED: u64 = 6;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate_synthetic_fst(seed: u64, n: usize) -> Result<SyntheticFst> {
    generate_with_config(seed, SyntheticConfig::new(n))
}

pub fn generate_with_config(seed: u64, config: SyntheticConfig) -> Result<SyntheticFst> {
    ensure!(config.parallel >= 1, "synthetic corpus needs n >= 1");
    let lex = Lexicon::new();

    let mut rng = stream(seed, STREAM_PARALLEL);
    let mut seen = HashSet::new();
    let mut pairs = Vec::with_capacity(config.parallel);
    for _ in 0..config.parallel {
        let formal = draw_formal(&lex, &TEMPLATES, &mut rng);
        let informal = informalize(&formal, &mut rng);
        seen.insert(formal.clone());
        pairs.push(ParallelPair::original(
            Sentence::new(&informal)?,
            Sentence::new(&formal)?,
        ));
    }

    let mono = |stream_id: u64, count: usize, informal: bool| -> Result<Vec<Sentence>> {
        let mut rng = stream(seed, stream_id);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count && attempts < count * 50 {
            attempts += 1;
            let formal = draw_formal(&lex, &TEMPLATES, &mut rng);
            if seen.contains(&formal) {
                continue;
            }
            let text = if informal {
                informalize(&formal, &mut rng)
            } else {
                formal
            };
            out.push(Sentence::new(&text)?);
        }
        Ok(out)
    };

    let parallel = ParallelDataset::new(pairs)
        .with_meta("method", "synthetic")
        .with_meta("seed", seed.to_string());
    Ok(SyntheticFst {
        parallel,
        formal_mono: Corpus::new("formal_mono", mono(STREAM_FORMAL_MONO, config.formal_mono, false)?),
        informal_mono: Corpus::new(
            "informal_mono",
            mono(STREAM_INFORMAL_MONO, config.informal_mono, true)?,
        ),
    })
}

/// Held-out test set: informal sources with the formal original plus three
/// paraphrased references.
pub fn generate_test_set(seed: u64, n: usize) -> Result<MultiRefTestSet> {
    let lex = Lexicon::new();
    let mut rng = stream(seed, STREAM_TEST);
    let mut items = Vec::with_capacity(n);
    for _ in 0..n {
        let formal = draw_formal(&lex, &TEMPLATES, &mut rng);
        let informal = informalize(&formal, &mut rng);
        let mut references = vec![Sentence::new(&formal)?];
        for _ in 1..super::REFERENCES_PER_ITEM {
            references.push(Sentence::new(&paraphrase(&formal, &mut rng))?);
        }
        items.push(MultiRefItem {
            source: Sentence::new(&informal)?,
            references,
        });
    }
    MultiRefTestSet::new(items)
}

fn paraphrase(formal: &str, rng: &mut ChaCha8Rng) -> String {
    formal
        .split(' ')
        .map(|w| {
            let (core, punct) = w.split_at(w.trim_end_matches(['.', '?']).len());
            match PARAPHRASES.iter().find(|(from, _)| *from == core) {
                Some((_, to)) if rng.gen_bool(0.5) => format!("{to}{punct}"),
                _ => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Labeled sentences for the formality discriminator: `n` formal and `n`
/// informal sentences from independent draws, interleaved.
pub fn generate_labeled(seed: u64, n: usize) -> Result<Vec<(Sentence, bool)>> {
    let lex = Lexicon::new();
    let mut rng = stream(seed, STREAM_LABELED);
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let formal = draw_formal(&lex, &TEMPLATES, &mut rng);
        out.push((Sentence::new(&formal)?, true));
        let other = draw_formal(&lex, &TEMPLATES, &mut rng);
        out.push((Sentence::new(&informalize(&other, &mut rng))?, false));
    }
    Ok(out)
}

/// Synthetic GEC records: grammatical sentences from [`GEC_TEMPLATES`] with
/// injected capitalization, punctuation and article errors, annotated with
/// the edits that fix them. About a third of the records carry a second
/// annotator who fixes only the first error; one in ten records is clean.
pub fn generate_synthetic_gec(seed: u64, n: usize) -> Result<Vec<M2Record>> {
    let lex = Lexicon::new();
    let mut rng = stream(seed, STREAM_GEC);
    let proper: Vec<&str> = proper_words().collect();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let formal = draw_formal(&lex, &GEC_TEMPLATES, &mut rng);
        let correct: Vec<String> = formal.split(' ').map(str::to_string).collect();
        if rng.gen_bool(0.1) {
            records.push(M2Record {
                source_tokens: correct,
                edits: vec![Edit::noop(0)],
            });
            continue;
        }
        // (source tokens, edits against the source) built left to right.
        let mut source: Vec<String> = Vec::with_capacity(correct.len());
        let mut edits = Vec::new();
        let last = correct.len() - 1;
        for (i, tok) in correct.iter().enumerate() {
            let pos = source.len() as i64;
            let is_article = i > 0 && (tok == "the" || tok == "a");
            if is_article && rng.gen_bool(0.3) {
                edits.push(Edit::new(pos, pos, "M:DET", tok, 0));
                continue;
            }
            let mut wrong = tok.clone();
            let bare = tok.trim_end_matches('.');
            if i == 0 && rng.gen_bool(0.6) {
                wrong = wrong.to_lowercase();
            } else if proper.contains(&bare) && rng.gen_bool(0.6) {
                wrong = wrong.to_lowercase();
            } else if tok == "I" && rng.gen_bool(0.6) {
                wrong = "i".into();
            }
            if i == last && rng.gen_bool(0.6) {
                wrong = wrong.trim_end_matches('.').to_string();
            }
            if wrong != *tok {
                let kind = if wrong.to_lowercase() == tok.to_lowercase() {
                    "R:ORTH"
                } else {
                    "M:PUNCT"
                };
                edits.push(Edit::new(pos, pos + 1, kind, tok, 0));
            }
            source.push(wrong);
        }
        if edits.is_empty() {
            edits.push(Edit::noop(0));
        } else if edits.len() > 1 && rng.gen_bool(0.35) {
            let mut second = edits[0].clone();
            second.annotator = 1;
            edits.push(second);
        }
        records.push(M2Record {
            source_tokens: source,
            edits,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_meets_minimum_size() {
        assert!(TEMPLATES.len() >= 20);
        let lexicon = NAMES.len() + NOUNS.len() + ADJECTIVES.len() + VERBS.len() + PLACES.len();
        assert!(lexicon >= 50);
    }

    #[test]
    fn rule_table_example() {
        assert_eq!(
            informalize_with("Please send the report to me.", None),
            "plz send the report 2 me"
        );
        assert_eq!(
            informalize_with("Are you going to the park today?", Some("lol")),
            "r u going 2 the park today lol"
        );
    }

    #[test]
    fn full_restore_inverts_rules() {
        for formal in [
            "Please send the report to me.",
            "Could you please call John on Monday?",
            "I think your book is very good.",
        ] {
            let informal = informalize_with(formal, Some("btw"));
            assert_eq!(restore(&informal, |_| true), formal);
        }
        assert_eq!(restore("plz send the report 2 me", |_| false), "plz send the report 2 me");
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate_synthetic_fst(11, 50).unwrap();
        let b = generate_synthetic_fst(11, 50).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic_fst(12, 50).unwrap());
    }

    #[test]
    fn zero_size_violates_contract() {
        assert!(generate_synthetic_fst(1, 0).is_err());
    }

    #[test]
    fn informal_side_has_no_uppercase() {
        let data = generate_synthetic_fst(5, 300).unwrap();
        let informal = data
            .parallel
            .pairs
            .iter()
            .map(|p| &p.source)
            .chain(&data.informal_mono.sentences);
        for s in informal {
            assert!(!s.as_str().chars().any(char::is_uppercase), "{s}");
        }
    }

    #[test]
    fn monolingual_splits_avoid_parallel_sentences() {
        let data = generate_synthetic_fst(5, 200).unwrap();
        let targets: HashSet<_> = data.parallel.pairs.iter().map(|p| p.target.clone()).collect();
        assert!(data.formal_mono.sentences.iter().all(|s| !targets.contains(s)));
        assert_eq!(data.formal_mono.len(), 800);
    }

    #[test]
    fn test_set_first_reference_matches_source() {
        let set = generate_test_set(3, 40).unwrap();
        for item in set.items() {
            let informal = item.source.as_str();
            let stripped = informal
                .strip_suffix(" lol")
                .or(informal.strip_suffix(" btw"))
                .or(informal.strip_suffix(" imo"))
                .unwrap_or(informal);
            assert_eq!(informalize_with(item.references[0].as_str(), None), stripped);
        }
    }

    #[test]
    fn gec_records_fix_to_grammatical_sentences() {
        let records = generate_synthetic_gec(4, 200).unwrap();
        let mut fixed = 0;
        for r in &records {
            if let Some(pair) = crate::textdata::apply_edits(r, 0) {
                let t = pair.target.as_str();
                assert!(t.ends_with('.'), "{t}");
                assert!(t.chars().next().unwrap().is_uppercase(), "{t}");
                fixed += 1;
            }
        }
        assert!(fixed > 150);
        let text = crate::textdata::write_m2(&records);
        assert_eq!(crate::textdata::parse_m2(&text).unwrap(), records);
    }
}
