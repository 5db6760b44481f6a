//! Approximate nullity (A1), symmetry (A2) and strict desirability (A3) checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|φ_i|` at or below this counts as a true null player.
pub const NULL_TOL: f64 = 1e-12;

/// Cut on standardised reference values for the `ε_abs` metric.
const EPS_ABS_CUT: f64 = 0.01;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn check_pair(n: usize, (i, j): (usize, usize)) -> Result<()> {
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidArgument(format!(
            "invalid pair ({i}, {j}) for n={n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Report {
    pub violations: Vec<usize>,
    pub eps_abs: Option<f64>,
}

/// Null players whose estimate exceeds `ε₂ = ε₁ξ` in magnitude.
pub fn check_a1(phi_ref: &[f64], phi_hat: &[f64], epsilon1: f64, xi: f64) -> Result<A1Report> {
    same_len(phi_ref, phi_hat)?;
    let eps2 = epsilon1 * xi;
    let violations = (0..phi_ref.len())
        .filter(|&i| phi_ref[i].abs() <= NULL_TOL && phi_hat[i].abs() > eps2)
        .collect();
    Ok(A1Report {
        violations,
        eps_abs: eps_abs(phi_ref, phi_hat).ok(),
    })
}

/// `Σ |φ̂_i − φ_i|` over `{i : |φ_i| ≤ 0.01}` after scaling both vectors to sum 1.
pub fn eps_abs(phi_ref: &[f64], phi_hat: &[f64]) -> Result<f64> {
    same_len(phi_ref, phi_hat)?;
    let sr: f64 = phi_ref.iter().sum();
    let sh: f64 = phi_hat.iter().sum();
    if !(sr > 0.0 && sh > 0.0) {
        return Err(Error::Undefined(format!(
            "standardisation needs positive sums (reference {sr}, estimate {sh})"
        )));
    }
    Ok(phi_ref
        .iter()
        .zip(phi_hat)
        .map(|(r, h)| (r / sr, h / sh))
        .filter(|(r, _)| r.abs() <= EPS_ABS_CUT)
        .map(|(r, h)| (h - r).abs())
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Pair {
    pub i: usize,
    pub j: usize,
    pub deviation: f64,
    pub threshold: f64,
    pub violated: bool,
    /// `max(φ̂_i/φ̂_j, φ̂_j/φ̂_i)`; `None` when the estimates differ in sign or one is zero.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    pub pairs: Vec<A2Pair>,
    pub violations: usize,
    pub rate: f64,
    /// `log Σ ρ` over pairs with a finite ratio.
    pub deviation_ratio_logsum: Option<f64>,
    pub infinite_rho: usize,
}

/// Symmetric pairs whose estimates differ by more than `ε₁(|φ_i|+|φ_j|) + 2ε₂`.
pub fn check_a2(
    phi_ref: &[f64],
    phi_hat: &[f64],
    epsilon1: f64,
    xi: f64,
    symmetric_pairs: &[(usize, usize)],
) -> Result<A2Report> {
    same_len(phi_ref, phi_hat)?;
    if symmetric_pairs.is_empty() {
        return Err(Error::EmptyInput("symmetric pairs"));
    }
    let eps2 = epsilon1 * xi;
    let mut pairs = Vec::with_capacity(symmetric_pairs.len());
    for &(i, j) in symmetric_pairs {
        check_pair(phi_ref.len(), (i, j))?;
        let (a, b) = (phi_hat[i], phi_hat[j]);
        let deviation = (a - b).abs();
        let threshold = epsilon1 * (phi_ref[i].abs() + phi_ref[j].abs()) + 2.0 * eps2;
        let rho = (a * b > 0.0).then(|| (a / b).max(b / a));
        pairs.push(A2Pair {
            i,
            j,
            deviation,
            threshold,
            violated: deviation > threshold,
            rho,
        });
    }
    let violations = pairs.iter().filter(|p| p.violated).count();
    let finite: Vec<f64> = pairs.iter().filter_map(|p| p.rho).collect();
    Ok(A2Report {
        rate: violations as f64 / pairs.len() as f64,
        violations,
        deviation_ratio_logsum: (!finite.is_empty()).then(|| finite.iter().sum::<f64>().ln()),
        infinite_rho: pairs.len() - finite.len(),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A3Report {
    pub violations: usize,
    pub rate: f64,
}

/// Ordered pairs `(i, j)` with `i` strictly more desirable where
/// `φ̂_i − φ̂_j ≤ −(ε₁|φ_i| + ε₂) − (ε₁|φ_j| + ε₂)`.
pub fn check_a3(
    phi_ref: &[f64],
    phi_hat: &[f64],
    epsilon1: f64,
    xi: f64,
    desirable_pairs: &[(usize, usize)],
) -> Result<A3Report> {
    same_len(phi_ref, phi_hat)?;
    if desirable_pairs.is_empty() {
        return Err(Error::EmptyInput("desirable pairs"));
    }
    let eps2 = epsilon1 * xi;
    let mut violations = 0;
    for &(i, j) in desirable_pairs {
        check_pair(phi_ref.len(), (i, j))?;
        let band = epsilon1 * phi_ref[i].abs() + eps2 + epsilon1 * phi_ref[j].abs() + eps2;
        if phi_hat[i] - phi_hat[j] <= -band {
            violations += 1;
        }
    }
    Ok(A3Report {
        violations,
        rate: violations as f64 / desirable_pairs.len() as f64,
    })
}
