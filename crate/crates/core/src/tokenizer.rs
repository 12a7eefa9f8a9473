//! Byte-pair encoding over whitespace words, shared by every model.
//!
//! Words start as their characters followed by a separate end-of-word
//! symbol. Learning repeatedly merges the most frequent adjacent pair; ties go
//! to the lexicographically smallest `(left, right)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::textdata::{io, Corpus, Sentence};

pub const END_OF_WORD: &str = "⟨/w⟩";
pub const UNK_MARKER: &str = "⟨unk⟩";

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

pub const DEFAULT_MERGES: usize = 1000;
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq(pub Vec<u32>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    merges: Vec<(String, String)>,
    vocab: BTreeMap<String, u32>,
}

pub fn learn_bpe(corpora: &[&Corpus], merge_count: usize) -> Result<BpeModel> {
    let mut word_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for corpus in corpora {
        for s in &corpus.sentences {
            for w in s.words() {
                *word_freq.entry(w).or_insert(0) += 1;
            }
        }
    }
    ensure!(!word_freq.is_empty(), "BPE needs a non-empty corpus");

    let mut words: Vec<(Vec<String>, usize)> = word_freq
        .iter()
        .map(|(w, &f)| (initial_symbols(w), f))
        .collect();
    let chars: BTreeSet<String> = word_freq
        .keys()
        .flat_map(|w| w.chars().map(String::from))
        .collect();

    let mut merges = Vec::new();
    while merges.len() < merge_count {
        let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
        for (syms, f) in &words {
            for pair in syms.windows(2) {
                *counts.entry((&pair[0], &pair[1])).or_insert(0) += f;
            }
        }
        let best = counts
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .min_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
        let Some(((left, right), _)) = best else {
            break;
        };
        let (left, right) = (left.to_string(), right.to_string());
        for (syms, _) in &mut words {
            merge_in_place(syms, &left, &right);
        }
        merges.push((left, right));
    }

    let mut vocab: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    vocab.extend(chars);
    vocab.push(END_OF_WORD.to_string());
    for (l, r) in &merges {
        vocab.push(format!("{l}{r}"));
    }
    BpeModel::from_parts(merges, vocab)
}

fn initial_symbols(word: &str) -> Vec<String> {
    word.chars()
        .map(String::from)
        .chain(std::iter::once(END_OF_WORD.to_string()))
        .collect()
}

fn merge_in_place(syms: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < syms.len() {
        if syms[i] == left && syms[i + 1] == right {
            let merged = format!("{left}{right}");
            syms.splice(i..i + 2, std::iter::once(merged));
        }
        i += 1;
    }
}

impl BpeModel {
    fn from_parts(merges: Vec<(String, String)>, tokens: Vec<String>) -> Result<Self> {
        let mut token_to_id = HashMap::new();
        let mut id_to_token = Vec::new();
        for t in tokens {
            if !token_to_id.contains_key(&t) {
                token_to_id.insert(t.clone(), id_to_token.len() as u32);
                id_to_token.push(t);
            }
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            ensure!(
                token_to_id.get(*s) == Some(&(i as u32)),
                "special token {s} must have id {i}"
            );
        }
        let mut ranks = HashMap::new();
        for (i, m) in merges.iter().enumerate() {
            ensure!(
                ranks.insert(m.clone(), i).is_none(),
                "duplicate merge ({}, {})",
                m.0,
                m.1
            );
            ensure!(
                token_to_id.contains_key(&format!("{}{}", m.0, m.1)),
                "merge result {}{} missing from vocabulary",
                m.0,
                m.1
            );
        }
        Ok(BpeModel {
            merges,
            ranks,
            token_to_id,
            id_to_token,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    /// Segments one word by applying merges in learned order.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let mut syms = initial_symbols(word);
        loop {
            let best = syms
                .windows(2)
                .enumerate()
                .filter_map(|(i, p)| {
                    self.ranks
                        .get(&(p[0].clone(), p[1].clone()))
                        .map(|&r| (r, i))
                })
                .min();
            let Some((rank, _)) = best else {
                return syms;
            };
            let (l, r) = &self.merges[rank];
            merge_in_place(&mut syms, l, r);
        }
    }

    pub fn encode(&self, s: &Sentence) -> TokenSeq {
        let mut ids = Vec::new();
        for w in s.words() {
            for sym in self.segment_word(w) {
                ids.push(self.id(&sym).unwrap_or(UNK));
            }
        }
        TokenSeq(ids)
    }

    pub fn decode(&self, t: &TokenSeq) -> Result<Sentence> {
        let mut text = String::new();
        for &id in &t.0 {
            let tok = self
                .token(id)
                .ok_or_else(|| Error::Contract(format!("token id {id} outside vocabulary")))?;
            match id {
                UNK => text.push_str(UNK_MARKER),
                PAD | BOS | EOS => {}
                _ => text.push_str(tok),
            }
        }
        Sentence::new(&text.replace(END_OF_WORD, " "))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path, serde_json::to_string(&self.to_json())?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(serde_json::from_str(&io::read_text(path)?)?)
    }

    /// JSON form used by [`BpeModel::save`], also embedded in model checkpoints.
    pub fn to_json(&self) -> serde_json::Value {
        let file = ModelFile {
            version: MODEL_VERSION,
            merges: self.merges.clone(),
            vocab: self
                .token_to_id
                .iter()
                .map(|(t, &i)| (t.clone(), i))
                .collect(),
        };
        serde_json::to_value(file).expect("BPE model serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value)?;
        ensure!(
            file.version == MODEL_VERSION,
            "unsupported BPE model version {}",
            file.version
        );
        let mut tokens = vec![String::new(); file.vocab.len()];
        for (t, i) in file.vocab {
            let slot = tokens
                .get_mut(i as usize)
                .ok_or_else(|| Error::Contract(format!("vocabulary id {i} is not dense")))?;
            *slot = t;
        }
        BpeModel::from_parts(file.merges, tokens)
    }
}
