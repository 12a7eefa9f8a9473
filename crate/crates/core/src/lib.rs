//! Parallel-data augmentation for informal-to-formal style transfer.

pub mod augment;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod fstmodel;
pub mod textdata;
pub mod neural;
pub mod recipes;
pub mod tokenizer;
pub mod trainer;

pub use error::{Error, Result};
