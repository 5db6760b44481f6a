//! Fidelity scores, probabilistic fairness bounds and evaluation metrics.

mod axioms;
mod chebyshev;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimationResult, FsFormula};

pub use axioms::{
    check_a1, check_a2, check_a3, eps_abs, A1Report, A2Pair, A2Report, A3Report, NULL_TOL,
};
pub use chebyshev::{chebyshev_check, ChebyshevCell, ChebyshevTable};
pub use metrics::{mape, nl_nsw, rank_metrics, NlNsw, RankMetrics};

/// Per-player fidelity scores and invariabilities of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fs: Vec<f64>,
    pub invariability: Vec<f64>,
    pub min_fs: f64,
    pub xi: f64,
    pub formula: FsFormula,
}

pub fn fidelity_report(
    result: &EstimationResult,
    xi: f64,
    formula: FsFormula,
) -> Result<FidelityReport> {
    let fs = result
        .estimates
        .iter()
        .map(|e| e.fidelity_score(xi, formula))
        .collect::<Result<Vec<_>>>()?;
    let invariability = fs
        .iter()
        .zip(&result.m_per_player)
        .map(|(f, &m)| f / m as f64)
        .collect();
    let min_fs = fs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FidelityReport {
        fs,
        invariability,
        min_fs,
        xi,
        formula,
    })
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be > 0, got {x}"
        )))
    }
}

/// Failure probability `δ` for `(ε₁, ε₁ξ, δ)`-fairness given the minimum score.
///
/// Independent estimates: `1 − (1 − 1/(ε₁²f̲))ⁿ`. Dependent: `min(1, n/(ε₁²f̲))`.
pub fn delta_bound(min_fs: f64, epsilon1: f64, n: usize, independent: bool) -> Result<f64> {
    check_positive("min_fs", min_fs)?;
    check_positive("epsilon1", epsilon1)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let k = epsilon1 * epsilon1 * min_fs;
    if independent {
        if k <= 1.0 {
            return Ok(1.0);
        }
        // 1 − (1 − 1/k)ⁿ without cancellation for large k.
        Ok((-(n as f64 * (-1.0 / k).ln_1p()).exp_m1()).clamp(0.0, 1.0))
    } else {
        Ok((n as f64 / k).min(1.0))
    }
}

/// `1 − Π (1 − 1/(ε₁²f_i))`: the independent bound with each player's own score.
pub fn delta_per_player_independent(fs: &[f64], epsilon1: f64) -> Result<f64> {
    check_positive("epsilon1", epsilon1)?;
    let mut log_ok = 0.0;
    for &f in fs {
        check_positive("fidelity score", f)?;
        let k = epsilon1 * epsilon1 * f;
        if k <= 1.0 {
            return Ok(1.0);
        }
        log_ok += (-1.0 / k).ln_1p();
    }
    Ok((-log_ok.exp_m1()).clamp(0.0, 1.0))
}

/// `min(1, Σ 1/(ε₁²f_i))`: the union bound with each player's own score.
pub fn delta_union_bound(fs: &[f64], epsilon1: f64) -> Result<f64> {
    check_positive("epsilon1", epsilon1)?;
    let mut total = 0.0;
    for &f in fs {
        check_positive("fidelity score", f)?;
        total += 1.0 / (epsilon1 * epsilon1 * f);
    }
    Ok(total.min(1.0))
}

/// Smallest total budget that reaches failure probability `delta`.
///
/// Independent: `n / (max_r·ε₁²·(1 − (1−δ)^{1/n}))`. Dependent: `n² / (max_r·ε₁²·δ)`.
pub fn budget_bound(
    n: usize,
    epsilon1: f64,
    delta: f64,
    independent: bool,
    max_r: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    check_positive("epsilon1", epsilon1)?;
    check_positive("max_r", max_r)?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let nf = n as f64;
    let scale = max_r * epsilon1 * epsilon1;
    if independent {
        let root = -((-delta).ln_1p() / nf).exp_m1();
        Ok(nf / (scale * root))
    } else {
        Ok(nf * nf / (scale * delta))
    }
}

/// Bounds and axiom checks at one `ε₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon1: f64,
    pub delta_independent: f64,
    pub delta_dependent: f64,
    pub delta_per_player: f64,
    pub delta_union: f64,
    pub a1_violations: usize,
    pub a2_violation_rate: Option<f64>,
    pub a3_violation_rate: Option<f64>,
}

/// Every diagnostic of one run against a reference vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub by_epsilon: Vec<EpsilonRow>,
    pub a2_pairs: usize,
    pub a2_details: Option<A2Report>,
    pub deviation_ratio_logsum: Option<f64>,
    pub infinite_rho: usize,
    pub eps_abs: Option<f64>,
    pub nl_nsw: Option<f64>,
    pub nl_nsw_excluded: usize,
    pub n_inv: u64,
    pub eps_inv: f64,
    pub mape: Option<f64>,
    pub mse: f64,
}

/// Inputs shared by every run on the same game.
#[derive(Debug, Clone, Default)]
pub struct FairnessContext {
    pub phi_ref: Vec<f64>,
    pub symmetric_pairs: Vec<(usize, usize)>,
    pub desirable_pairs: Vec<(usize, usize)>,
    pub epsilon1_grid: Vec<f64>,
}

pub fn fairness_report(
    ctx: &FairnessContext,
    phi_hat: &[f64],
    fidelity: &FidelityReport,
) -> Result<FairnessReport> {
    let n = ctx.phi_ref.len();
    if phi_hat.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: phi_hat.len(),
        });
    }
    let xi = fidelity.xi;
    let mut by_epsilon = Vec::with_capacity(ctx.epsilon1_grid.len());
    let mut a2_details = None;
    for (k, &eps) in ctx.epsilon1_grid.iter().enumerate() {
        let (di, dd, dp, du) = if fidelity.min_fs.is_infinite() {
            (0.0, 0.0, 0.0, 0.0)
        } else if !(fidelity.min_fs > 0.0) {
            // Only reachable with the signed score formula.
            (1.0, 1.0, 1.0, 1.0)
        } else {
            (
                delta_bound(fidelity.min_fs, eps, n, true)?,
                delta_bound(fidelity.min_fs, eps, n, false)?,
                delta_per_player_independent(&fidelity.fs, eps)?,
                delta_union_bound(&fidelity.fs, eps)?,
            )
        };
        let a1 = check_a1(&ctx.phi_ref, phi_hat, eps, xi)?;
        let a2 = if ctx.symmetric_pairs.is_empty() {
            None
        } else {
            Some(check_a2(
                &ctx.phi_ref,
                phi_hat,
                eps,
                xi,
                &ctx.symmetric_pairs,
            )?)
        };
        let a3 = if ctx.desirable_pairs.is_empty() {
            None
        } else {
            Some(check_a3(
                &ctx.phi_ref,
                phi_hat,
                eps,
                xi,
                &ctx.desirable_pairs,
            )?)
        };
        by_epsilon.push(EpsilonRow {
            epsilon1: eps,
            delta_independent: di,
            delta_dependent: dd,
            delta_per_player: dp,
            delta_union: du,
            a1_violations: a1.violations.len(),
            a2_violation_rate: a2.as_ref().map(|r| r.rate),
            a3_violation_rate: a3.map(|r| r.rate),
        });
        if k == 0 {
            a2_details = a2;
        }
    }
    let ranks = rank_metrics(&ctx.phi_ref, phi_hat)?;
    let nsw = nl_nsw(&fidelity.fs).ok();
    let nl_nsw_excluded = fidelity.fs.iter().filter(|f| f.is_infinite()).count();
    Ok(FairnessReport {
        by_epsilon,
        a2_pairs: ctx.symmetric_pairs.len(),
        deviation_ratio_logsum: a2_details.as_ref().and_then(|r| r.deviation_ratio_logsum),
        infinite_rho: a2_details.as_ref().map_or(0, |r| r.infinite_rho),
        a2_details,
        eps_abs: eps_abs(&ctx.phi_ref, phi_hat).ok(),
        nl_nsw: nsw.map(|r| r.value),
        nl_nsw_excluded,
        n_inv: ranks.n_inv,
        eps_inv: ranks.eps_inv,
        mape: ranks.mape,
        mse: ranks.mse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        let d = delta_bound(1000.0, 0.1, 10, true).unwrap();
        assert!((d - (1.0 - 0.9f64.powi(10))).abs() < 1e-12);
        assert!((d - 0.6513).abs() < 1e-4);
        // 10 / (0.1² · 1000) is 1 up to rounding of 0.1².
        assert!((delta_bound(1000.0, 0.1, 10, false).unwrap() - 1.0).abs() < 1e-12);
        assert!(delta_bound(1e300, 0.1, 10, true).unwrap() < 1e-290);
        assert!(delta_bound(1e300, 0.1, 10, false).unwrap() < 1e-290);
        assert_eq!(delta_bound(50.0, 0.1, 3, true).unwrap(), 1.0);
        assert!(delta_bound(0.0, 0.1, 3, true).is_err());
        assert!(delta_bound(10.0, -0.1, 3, false).is_err());
    }

    #[test]
    fn per_player_variants_match_min_fs_when_equal() {
        let fs = [1000.0; 10];
        let a = delta_per_player_independent(&fs, 0.1).unwrap();
        assert!((a - delta_bound(1000.0, 0.1, 10, true).unwrap()).abs() < 1e-12);
        assert!((delta_union_bound(&[2000.0, 4000.0], 0.1).unwrap() - 0.075).abs() < 1e-12);
    }

    #[test]
    fn budget_examples() {
        assert!((budget_bound(1, 1.0, 0.5, true, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let b4 = budget_bound(4, 0.3, 0.1, false, 2.0).unwrap();
        let b8 = budget_bound(8, 0.3, 0.1, false, 2.0).unwrap();
        assert_eq!(b8 / b4, 4.0);
        // (1−δ)^{1/n} shrinks slowly: at 1−δ = 1e-15 and n = 5 it is 1e-3.
        let limit = 5.0 / (2.0 * 0.25);
        let near_one = budget_bound(5, 0.5, 1.0 - 1e-15, true, 2.0).unwrap();
        assert!(near_one > limit && (near_one / limit - 1.0) < 2e-3);
        assert!(budget_bound(5, 0.5, 1.0, true, 2.0).is_err());
        assert!(budget_bound(5, 0.5, 0.0, true, 2.0).is_err());
    }

    #[test]
    fn budget_round_trip_through_delta() {
        let (n, eps, delta, r) = (7, 0.2, 0.05, 3.0);
        let m = budget_bound(n, eps, delta, true, r).unwrap();
        let back = delta_bound(r * m / n as f64, eps, n, true).unwrap();
        assert!((back - delta).abs() < 1e-9);
    }
}
