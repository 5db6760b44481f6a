//! Budget allocation with known invariabilities, independent of any game.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the equality clauses of the Pigou-Dalton comparison.
const PDP_REL_TOL: f64 = 1e-9;

/// Denominators smaller than this make `delta_p` degenerate.
const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// `(ε²r − 1/(m+1)) / (ε²r − 1/m)`: how much one more sample multiplies the
/// per-player Chebyshev success probability.
pub fn delta_p(r_hat: f64, m_i: u64, epsilon1: f64) -> Result<f64> {
    if m_i == 0 {
        return Err(Error::InvalidArgument("delta_p needs m_i >= 1".into()));
    }
    if !(epsilon1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon1 must be > 0, got {epsilon1}"
        )));
    }
    if r_hat.is_infinite() {
        return Ok(1.0);
    }
    let a = epsilon1 * epsilon1 * r_hat;
    let m = m_i as f64;
    let denominator = a - 1.0 / m;
    if denominator.abs() < DEGENERATE_DENOMINATOR {
        return Err(Error::DegenerateBound { denominator });
    }
    Ok((a - 1.0 / (m + 1.0)) / denominator)
}

/// Samples per player and the resulting scores `f_i = m_i·r_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedAllocation {
    pub m: Vec<u64>,
    pub fs: Vec<f64>,
}

impl FixedAllocation {
    fn from_counts(r: &[f64], m: Vec<u64>) -> Self {
        let fs = m.iter().zip(r).map(|(&k, &ri)| k as f64 * ri).collect();
        FixedAllocation { m, fs }
    }

    pub fn min_fs(&self) -> f64 {
        self.fs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_r(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::EmptyInput("invariabilities"));
    }
    if let Some(bad) = r.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "invariability must be finite and > 0, got {bad}"
        )));
    }
    Ok(())
}

/// Greedy allocation of `m_total` samples with fixed invariabilities `r`:
/// every sample goes to the player with the lowest `m_i·r_i` (lowest index on ties).
pub fn simulate_greedy_allocation(r: &[f64], m_total: u64) -> Result<FixedAllocation> {
    check_r(r)?;
    let mut m = vec![0u64; r.len()];
    for _ in 0..m_total {
        let mut best = 0;
        for i in 1..r.len() {
            if (m[i] as f64) * r[i] < (m[best] as f64) * r[best] {
                best = i;
            }
        }
        m[best] += 1;
    }
    Ok(FixedAllocation::from_counts(r, m))
}

/// `⌊m/n⌋` each, remainder to the lowest indices.
pub fn equal_split_allocation(r: &[f64], m_total: u64) -> Result<FixedAllocation> {
    check_r(r)?;
    let n = r.len() as u64;
    let m = (0..n)
        .map(|i| m_total / n + u64::from(i < m_total % n))
        .collect();
    Ok(FixedAllocation::from_counts(r, m))
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= PDP_REL_TOL * a.abs().max(b.abs())
}

/// Whether the Pigou-Dalton principle prefers `f` to `g`: some pair `(i, j)`
/// has equal totals and a strictly smaller gap in `f`, with every other entry equal.
pub fn pdp_prefers(f: &[f64], g: &[f64]) -> Result<bool> {
    if f.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: f.len(),
            actual: g.len(),
        });
    }
    let n = f.len();
    let differing: Vec<usize> = (0..n).filter(|&k| !close(f[k], g[k])).collect();
    if differing.len() > 2 {
        return Ok(false);
    }
    for i in 0..n {
        for j in i + 1..n {
            if differing.iter().any(|&k| k != i && k != j) {
                continue;
            }
            if close(f[i] + f[j], g[i] + g[j]) && (f[i] - f[j]).abs() < (g[i] - g[j]).abs() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
