//! Correlation and resampling statistics.

use rand::Rng;

use crate::error::{ensure, Error, Result};

/// Sample Pearson correlation. Zero variance in either input is an error
/// rather than a silent 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure!(x.len() == y.len(), "pearson: lengths differ ({} vs {})", x.len(), y.len());
    ensure!(x.len() >= 2, "pearson: need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "zero variance in {}",
            if sxx == 0.0 { "x" } else { "y" }
        )));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided paired bootstrap over items. `diffs` holds the per-item
/// difference between two systems; the p-value is twice the smaller tail
/// of resampled mean differences on either side of zero, capped at 1.
pub fn paired_bootstrap(diffs: &[f64], resamples: usize, rng: &mut impl Rng) -> Result<f64> {
    ensure!(!diffs.is_empty(), "bootstrap needs at least one paired item");
    ensure!(resamples >= 1, "bootstrap needs at least one resample");
    let n = diffs.len();
    let (mut at_most_zero, mut at_least_zero) = (0usize, 0usize);
    for _ in 0..resamples {
        let mean = (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum::<f64>() / n as f64;
        if mean <= 0.0 {
            at_most_zero += 1;
        }
        if mean >= 0.0 {
            at_least_zero += 1;
        }
    }
    let tail = at_most_zero.min(at_least_zero) as f64 / resamples as f64;
    Ok((2.0 * tail).min(1.0))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.0, 4.0, 7.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let err = pearson(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::UndefinedCorrelation(_)));
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn hand_computed_value() {
        // means 1.25 and 1.0; sxy = 2.0, sxx = 2.75, syy = 2.0
        let r = pearson(&[0.0, 1.0, 2.0, 2.0], &[0.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((r - 2.0 / (2.75f64 * 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(paired_bootstrap(&[0.0; 30], 1000, &mut rng).unwrap(), 1.0);
        let p = paired_bootstrap(&[1.0; 30], 1000, &mut rng).unwrap();
        assert_eq!(p, 0.0);
        let noisy: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(paired_bootstrap(&noisy, 2000, &mut rng).unwrap() > 0.5);
    }
}
