use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_mc, EstimatorConfig, EstimatorKind, SeedKey};
use crate::exact::exact_moments;
use crate::game::CooperativeGame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCell {
    pub player: usize,
    pub epsilon1: f64,
    /// Fraction of trials with `|φ̂_i − φ_i| > ε₁|φ_i| + ε₁ξ`.
    pub empirical: f64,
    /// `1/(ε₁²f_i)` with `f_i` from the exact variance.
    pub bound: f64,
    pub std_err: f64,
    pub vacuous: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevTable {
    pub trials: u32,
    pub m_per_player: Vec<u64>,
    pub fs_exact: Vec<f64>,
    pub cells: Vec<ChebyshevCell>,
}

impl ChebyshevTable {
    pub fn all_pass(&self) -> bool {
        self.cells.iter().all(|c| c.pass)
    }
}

/// Runs the estimator `trials` times and compares per-player deviation
/// frequencies with the Chebyshev bound.
///
/// Only MC is accepted: its per-player sample counts are fixed in advance, so
/// the variance of `φ̂_i` is exactly `V_i/m_i`.
pub fn chebyshev_check(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    epsilon1_list: &[f64],
    trials: u32,
    seed: u64,
) -> Result<ChebyshevTable> {
    if cfg.kind != EstimatorKind::Mc {
        return Err(Error::Unsupported(format!(
            "chebyshev check needs a fixed per-player allocation; {} allocates adaptively",
            cfg.name()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if let Some(bad) = epsilon1_list.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "epsilon1 must be > 0, got {bad}"
        )));
    }
    let exact = exact_moments(game)?;
    let n = game.n();
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| estimate_mc(game, cfg, SeedKey::new(seed, t)).map(|r| (r.phi_hat, r.m_per_player)))
        .collect::<Result<Vec<_>>>()?;
    let m_per_player = runs[0].1.clone();
    let fs_exact: Vec<f64> = (0..n)
        .map(|i| {
            let v = exact.variance_uniform[i];
            let s = exact.phi[i].abs() + cfg.xi;
            if v > 0.0 {
                m_per_player[i] as f64 * s * s / v
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut cells = Vec::with_capacity(n * epsilon1_list.len());
    for &eps in epsilon1_list {
        for i in 0..n {
            let tol = eps * exact.phi[i].abs() + eps * cfg.xi;
            let hits = runs
                .iter()
                .filter(|(phi, _)| (phi[i] - exact.phi[i]).abs() > tol)
                .count();
            let empirical = hits as f64 / trials as f64;
            let bound = 1.0 / (eps * eps * fs_exact[i]);
            let std_err = (empirical * (1.0 - empirical) / trials as f64).sqrt();
            cells.push(ChebyshevCell {
                player: i,
                epsilon1: eps,
                empirical,
                bound,
                std_err,
                vacuous: bound > 1.0,
                pass: empirical <= bound + 3.0 * std_err,
            });
        }
    }
    Ok(ChebyshevTable {
        trials,
        m_per_player,
        fs_exact,
        cells,
    })
}
