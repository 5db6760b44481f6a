use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    /// Inversions over ordered pairs, so each unordered inversion counts twice.
    pub n_inv: u64,
    pub eps_inv: f64,
    /// `None` when every reference value is zero.
    pub mape: Option<f64>,
    pub mse: f64,
}

pub fn rank_metrics(phi_ref: &[f64], phi_hat: &[f64]) -> Result<RankMetrics> {
    let n = phi_ref.len();
    if phi_hat.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: phi_hat.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "rank metrics need at least 2 players, got {n}"
        )));
    }
    let mut n_inv = 0u64;
    let mut eps_inv = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (r, h) = (phi_ref[i] - phi_ref[j], phi_hat[i] - phi_hat[j]);
            if (r > 0.0 && h < 0.0) || (r < 0.0 && h > 0.0) {
                n_inv += 1;
            }
            eps_inv += (r - h).abs();
        }
    }
    let mse = phi_ref
        .iter()
        .zip(phi_hat)
        .map(|(r, h)| (h - r) * (h - r))
        .sum::<f64>()
        / n as f64;
    Ok(RankMetrics {
        n_inv,
        eps_inv,
        mape: mape(phi_ref, phi_hat).ok(),
        mse,
    })
}

/// Mean `|(φ̂_i − φ_i)/φ_i|` over players with `φ_i ≠ 0`.
pub fn mape(phi_ref: &[f64], phi_hat: &[f64]) -> Result<f64> {
    if phi_hat.len() != phi_ref.len() {
        return Err(Error::LengthMismatch {
            expected: phi_ref.len(),
            actual: phi_hat.len(),
        });
    }
    let terms: Vec<f64> = phi_ref
        .iter()
        .zip(phi_hat)
        .filter(|(r, _)| **r != 0.0)
        .map(|(r, h)| ((h - r) / r).abs())
        .collect();
    if terms.is_empty() {
        return Err(Error::Undefined(
            "MAPE needs at least one non-zero reference value".into(),
        ));
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlNsw {
    pub value: f64,
    /// Infinite scores left out of the product.
    pub excluded: usize,
}

/// `−Σ log f_i` after scaling the finite scores to sum to their count.
pub fn nl_nsw(fs: &[f64]) -> Result<NlNsw> {
    if let Some(bad) = fs.iter().find(|f| !(**f > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "fidelity scores must be > 0, got {bad}"
        )));
    }
    let finite: Vec<f64> = fs.iter().copied().filter(|f| f.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Undefined("no finite fidelity scores".into()));
    }
    let scale = finite.len() as f64 / finite.iter().sum::<f64>();
    Ok(NlNsw {
        value: -finite.iter().map(|f| (f * scale).ln()).sum::<f64>(),
        excluded: fs.len() - finite.len(),
    })
}
