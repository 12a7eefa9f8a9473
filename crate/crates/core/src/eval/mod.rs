//! Automatic and human evaluation.

mod bleu;
pub mod humaneval;
mod ratings;
mod stats;

pub use bleu::{closest_ref_len, corpus_bleu, tokenize, BleuReport, MAX_ORDER};
pub use humaneval::{
    aggregate_ratings, build_humaneval_batch, load_items, save_items, AgreementReport, Correlation,
    Criterion, HiddenKey, HumanEvalBatch, HumanEvalItem, HumanEvalReport, RatingRecord, SystemScores,
};
pub use ratings::{Appended, RatingStore};
pub use stats::{paired_bootstrap, pearson};
