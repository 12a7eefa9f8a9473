use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParallelDataset;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    None,
    UpSample,
    DownSample,
}

/// Mixes original and augmented data for simultaneous training.
///
/// `DownSample` keeps `|original|` augmented pairs drawn without replacement.
/// `UpSample` repeats the original data until it is as large as the
/// augmented data. The result is shuffled with `seed`.
pub fn balance(
    original: &ParallelDataset,
    augmented: &ParallelDataset,
    mode: BalanceMode,
    seed: u64,
) -> Result<ParallelDataset> {
    if mode != BalanceMode::None {
        ensure!(
            !original.is_empty() && !augmented.is_empty(),
            "balancing needs non-empty original and augmented data"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    match mode {
        BalanceMode::None => {
            pairs.extend(original.pairs.iter().cloned());
            pairs.extend(augmented.pairs.iter().cloned());
        }
        BalanceMode::DownSample => {
            pairs.extend(original.pairs.iter().cloned());
            let k = original.len().min(augmented.len());
            let mut picked = index::sample(&mut rng, augmented.len(), k).into_vec();
            picked.sort_unstable();
            pairs.extend(picked.into_iter().map(|i| augmented.pairs[i].clone()));
        }
        BalanceMode::UpSample => {
            let target = augmented.len().max(original.len());
            pairs.extend(original.pairs.iter().cycle().take(target).cloned());
            pairs.extend(augmented.pairs.iter().cloned());
        }
    }
    pairs.shuffle(&mut rng);
    let mut out = ParallelDataset::new(pairs);
    out.metadata.insert("balance".into(), format!("{mode:?}"));
    out.metadata.insert("balance_seed".into(), seed.to_string());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::textdata::{ParallelPair, Provenance, Sentence};

    fn dataset(prefix: &str, n: usize, provenance: Provenance) -> ParallelDataset {
        let pairs = (0..n)
            .map(|i| {
                let s = Sentence::new(&format!("{prefix} {i}")).unwrap();
                ParallelPair::new(s.clone(), s, provenance).unwrap()
            })
            .collect();
        ParallelDataset::new(pairs)
    }

    fn counts(ds: &ParallelDataset) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        for p in &ds.pairs {
            *m.entry(p.source.to_string()).or_default() += 1;
        }
        m
    }

    #[test]
    fn down_sample_sizes() {
        let orig = dataset("o", 100, Provenance::Original);
        let aug = dataset("a", 1000, Provenance::Bt);
        let out = balance(&orig, &aug, BalanceMode::DownSample, 3).unwrap();
        assert_eq!(out.len(), 200);
        let n_aug = out.pairs.iter().filter(|p| p.provenance() == Provenance::Bt).count();
        assert_eq!(n_aug, 100);
        let c = counts(&out);
        assert!((0..100).all(|i| c[&format!("o {i}")] == 1));
    }

    #[test]
    fn up_sample_repeats_original() {
        let orig = dataset("o", 100, Provenance::Original);
        let aug = dataset("a", 1000, Provenance::Bt);
        let out = balance(&orig, &aug, BalanceMode::UpSample, 3).unwrap();
        assert_eq!(out.len(), 2000);
        let c = counts(&out);
        assert!((0..100).all(|i| c[&format!("o {i}")] == 10));
    }

    #[test]
    fn none_concatenates() {
        let orig = dataset("o", 3, Provenance::Original);
        let aug = dataset("a", 5, Provenance::Mtask);
        let out = balance(&orig, &aug, BalanceMode::None, 0).unwrap();
        assert_eq!(out.len(), 8);
        let mut expected = counts(&orig);
        expected.extend(counts(&aug));
        assert_eq!(counts(&out), expected);
    }

    #[test]
    fn empty_input_violates_contract() {
        let orig = dataset("o", 3, Provenance::Original);
        let empty = ParallelDataset::default();
        assert!(balance(&orig, &empty, BalanceMode::UpSample, 0).is_err());
        assert!(balance(&orig, &empty, BalanceMode::None, 0).is_ok());
    }

    #[test]
    fn shuffle_is_seeded() {
        let orig = dataset("o", 20, Provenance::Original);
        let aug = dataset("a", 50, Provenance::Bt);
        let a = balance(&orig, &aug, BalanceMode::DownSample, 9).unwrap();
        let b = balance(&orig, &aug, BalanceMode::DownSample, 9).unwrap();
        let c = balance(&orig, &aug, BalanceMode::DownSample, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.pairs, c.pairs);
    }
}
