use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    WarmupInverseSqrt,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: u64,
    pub mode: LrMode,
}

impl LrSchedule {
    pub fn warmup_inverse_sqrt(base: f64, warmup: u64) -> Result<Self> {
        let s = LrSchedule {
            base,
            warmup,
            mode: LrMode::WarmupInverseSqrt,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(base: f64) -> Result<Self> {
        let s = LrSchedule {
            base,
            warmup: 1,
            mode: LrMode::Constant,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.base > 0.0, "learning rate must be positive, got {}", self.base);
        ensure!(self.warmup >= 1, "warmup must be at least 1 step");
        Ok(())
    }

    /// Rate at 1-based `step`: linear warmup to `base`, then decay with the
    /// inverse square root of the step.
    pub fn lr_at(&self, step: u64) -> Result<f64> {
        ensure!(step >= 1, "learning-rate steps are 1-based");
        Ok(match self.mode {
            LrMode::Constant => self.base,
            LrMode::WarmupInverseSqrt => {
                let (s, w) = (step as f64, self.warmup as f64);
                self.base * (s / w).min((w / s).sqrt())
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_then_inverse_sqrt() {
        let s = LrSchedule::warmup_inverse_sqrt(0.0005, 8000).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(s.lr_at(8000).unwrap(), 0.0005));
        assert!(close(s.lr_at(2000).unwrap(), 0.000125));
        assert!(close(s.lr_at(32000).unwrap(), 0.00025));
        assert!(close(s.lr_at(1).unwrap(), 6.25e-8));
        assert!(s.lr_at(0).is_err());
    }

    #[test]
    fn constant_ignores_step() {
        let s = LrSchedule::constant(0.00025).unwrap();
        assert_eq!(s.lr_at(1).unwrap(), s.lr_at(100_000).unwrap());
    }

    #[test]
    fn invalid_schedules_rejected() {
        assert!(LrSchedule::warmup_inverse_sqrt(0.0, 10).is_err());
        assert!(LrSchedule::warmup_inverse_sqrt(0.1, 0).is_err());
    }
}
