use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the fidelity score is computed from a running estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsFormula {
    /// `m·(|φ̂| + ξ)² / s²`
    #[default]
    Def2,
    /// `m·(φ̂ + ξ)² / s²` (signed mean, as written in the pseudo-code)
    Alg1,
}

/// Online mean and variance of one player's weighted samples (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningEstimate {
    pub player: usize,
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub includes_bootstrap: bool,
}

impl RunningEstimate {
    pub fn new(player: usize) -> Self {
        RunningEstimate {
            player,
            count: 0,
            mean: 0.0,
            m2: 0.0,
            includes_bootstrap: false,
        }
    }

    pub fn update(&mut self, weighted_sample: f64) -> Result<()> {
        if !weighted_sample.is_finite() {
            return Err(Error::Numeric {
                player: self.player,
                step: self.count + 1,
                value: weighted_sample,
            });
        }
        self.count += 1;
        let delta = weighted_sample - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (weighted_sample - self.mean);
        Ok(())
    }

    /// Unbiased sample variance `m2 / (m − 1)`, if at least two samples were seen.
    pub fn sample_variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    /// `m·(|φ̂|+ξ)²/s²`, or `+∞` when the observed variance is zero.
    pub fn fidelity_score(&self, xi: f64, formula: FsFormula) -> Result<f64> {
        let s2 = self.sample_variance().ok_or(Error::InsufficientSamples {
            player: self.player,
            samples: self.count,
        })?;
        let signal = match formula {
            FsFormula::Def2 => self.mean.abs() + xi,
            FsFormula::Alg1 => self.mean + xi,
        };
        if s2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(self.count as f64 * signal * signal / s2)
    }

    /// Fidelity per sample, `f/m`.
    pub fn invariability(&self, xi: f64, formula: FsFormula) -> Result<f64> {
        Ok(self.fidelity_score(xi, formula)? / self.count as f64)
    }
}
