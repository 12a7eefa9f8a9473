//! Producers of augmented parallel data.

pub mod bt;
pub mod fdis;
pub mod mtask;
