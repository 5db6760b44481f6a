//! Cardinality proposals for importance sampling.
//!
//! The variance-optimal proposal puts mass `∝ sqrt(E_{U_c}[σ_i²])` on
//! cardinality `c`. It is estimated from bootstrap marginals (MLE), then
//! blended toward uniform with a flat Dirichlet prior of strength `α` (MAP).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExactProfile;
use crate::sampler::CardinalityDist;

/// Smallest probability any cardinality keeps, as a multiple of `1/n`.
pub const FLOOR_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalSource {
    Mle,
    Map,
    Uniform,
    Oracle,
}

/// Frozen per-player proposals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalParams {
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub source: ProposalSource,
}

impl ProposalParams {
    pub fn uniform(n: usize) -> Self {
        ProposalParams {
            theta: vec![vec![1.0 / n as f64; n]; n],
            alpha: 0.0,
            source: ProposalSource::Uniform,
        }
    }

    pub fn distributions(&self) -> Result<Vec<CardinalityDist>> {
        self.theta
            .iter()
            .map(|t| CardinalityDist::new(t.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StratumCell {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

/// Per-player, per-cardinality sample counts and sums of `σ` and `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumStats {
    n: usize,
    cells: Vec<StratumCell>,
}

impl StratumStats {
    pub fn new(n: usize) -> Self {
        StratumStats {
            n,
            cells: vec![StratumCell::default(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn accumulate(&mut self, player: usize, cardinality: usize, sigma: f64) -> Result<()> {
        if player >= self.n || cardinality >= self.n {
            return Err(Error::InvalidArgument(format!(
                "stratum ({player}, {cardinality}) outside {0}x{0}",
                self.n
            )));
        }
        let cell = &mut self.cells[player * self.n + cardinality];
        cell.count += 1;
        cell.sum += sigma;
        cell.sum_sq += sigma * sigma;
        Ok(())
    }

    pub fn cell(&self, player: usize, cardinality: usize) -> StratumCell {
        self.cells[player * self.n + cardinality]
    }

    pub fn player_cells(&self, player: usize) -> &[StratumCell] {
        &self.cells[player * self.n..(player + 1) * self.n]
    }
}

/// Clamps every entry to at least `FLOOR_SCALE / n` and renormalises.
pub fn floor_and_normalise(weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / n as f64; n];
    }
    let floor = FLOOR_SCALE / n as f64;
    let floored: Vec<f64> = weights.iter().map(|w| (w / total).max(floor)).collect();
    let z: f64 = floored.iter().sum();
    floored.into_iter().map(|p| p / z).collect()
}

/// `sqrt(mean σ²)` per observed stratum; unobserved strata get the mean observed weight.
fn stratum_weights(cells: &[StratumCell]) -> Option<Vec<f64>> {
    let observed: Vec<f64> = cells
        .iter()
        .filter(|c| c.count > 0)
        .map(|c| (c.sum_sq / c.count as f64).sqrt())
        .collect();
    if observed.is_empty() {
        return None;
    }
    let fill = observed.iter().sum::<f64>() / observed.len() as f64;
    Some(
        cells
            .iter()
            .map(|c| {
                if c.count > 0 {
                    (c.sum_sq / c.count as f64).sqrt()
                } else {
                    fill
                }
            })
            .collect(),
    )
}

/// Maximum-likelihood estimate of the optimal cardinality proposal for `player`.
pub fn mle_theta(stats: &StratumStats, player: usize) -> Result<Vec<f64>> {
    if player >= stats.n() {
        return Err(Error::InvalidArgument(format!(
            "player {player} out of range for n={}",
            stats.n()
        )));
    }
    let w =
        stratum_weights(stats.player_cells(player)).ok_or(Error::InsufficientData { player })?;
    Ok(floor_and_normalise(&w))
}

/// One proposal fitted on the strata pooled across all players.
pub fn mle_theta_shared(stats: &StratumStats) -> Result<Vec<f64>> {
    let n = stats.n();
    let pooled: Vec<StratumCell> = (0..n)
        .map(|c| {
            (0..n).fold(StratumCell::default(), |acc, i| {
                let cell = stats.cell(i, c);
                StratumCell {
                    count: acc.count + cell.count,
                    sum: acc.sum + cell.sum,
                    sum_sq: acc.sum_sq + cell.sum_sq,
                }
            })
        })
        .collect();
    let w = stratum_weights(&pooled).ok_or(Error::InsufficientData { player: 0 })?;
    Ok(floor_and_normalise(&w))
}

/// MAP estimate under a flat Dirichlet prior: `θ_c = (n·w_c + α) / (n + n·α)`.
pub fn map_theta(mle: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "prior strength must be finite and >= 0, got {alpha}"
        )));
    }
    let n = mle.len() as f64;
    let denom = n + n * alpha;
    Ok(mle.iter().map(|w| (n * w + alpha) / denom).collect())
}

/// The exact optimal proposal `∝ sqrt(E_{U_c}[σ_i²])`; null players get uniform.
pub fn oracle_theta(exact: &ExactProfile, player: usize) -> Result<Vec<f64>> {
    let row = exact.mean_sq_by_cardinality.get(player).ok_or_else(|| {
        Error::InvalidArgument(format!("player {player} out of range for n={}", exact.n()))
    })?;
    let w: Vec<f64> = row.iter().map(|m| m.max(0.0).sqrt()).collect();
    Ok(floor_and_normalise(&w))
}

/// Variance of the one-sample weighted estimator `σ/(n·θ(c))` under proposal `theta`.
pub fn proposal_variance(theta: &[f64], exact: &ExactProfile, player: usize) -> Result<f64> {
    let n = exact.n();
    if player >= n {
        return Err(Error::InvalidArgument(format!(
            "player {player} out of range for n={n}"
        )));
    }
    if theta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: theta.len(),
        });
    }
    if let Some(bad) = theta.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "proposal entry {bad} is not positive"
        )));
    }
    let phi = exact.phi[player];
    let nf = n as f64;
    let sum: f64 = (0..n)
        .map(|c| {
            exact.mean_sq_by_cardinality[player][c] / (nf * theta[c])
                - 2.0 * exact.mean_by_cardinality[player][c] * phi
        })
        .sum();
    Ok(sum / nf + phi * phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_moments;
    use crate::game::{make_synthetic, SyntheticGame};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn accumulate_updates_sums() {
        let mut s = StratumStats::new(3);
        s.accumulate(0, 1, 0.5).unwrap();
        assert_eq!(
            s.cell(0, 1),
            StratumCell {
                count: 1,
                sum: 0.5,
                sum_sq: 0.25
            }
        );
        s.accumulate(2, 0, 1.0).unwrap();
        s.accumulate(2, 0, -1.0).unwrap();
        assert_eq!(
            s.cell(2, 0),
            StratumCell {
                count: 2,
                sum: 0.0,
                sum_sq: 2.0
            }
        );
        assert!(s.accumulate(0, 3, 1.0).is_err());
    }

    #[test]
    fn accumulation_order_is_irrelevant() {
        let samples = [(0, 0, 0.25), (0, 1, -0.5), (1, 2, 2.0), (0, 0, 1.0)];
        let mut a = StratumStats::new(3);
        let mut b = StratumStats::new(3);
        for &(i, c, x) in &samples {
            a.accumulate(i, c, x).unwrap();
        }
        for &(i, c, x) in samples.iter().rev() {
            b.accumulate(i, c, x).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn mle_examples() {
        let mut s = StratumStats::new(3);
        for c in 0..3 {
            s.accumulate(0, c, 2.0).unwrap();
        }
        assert!(close(&mle_theta(&s, 0).unwrap(), &[1.0 / 3.0; 3], 1e-15));

        let mut s = StratumStats::new(3);
        s.accumulate(0, 0, 0.0).unwrap();
        s.accumulate(0, 1, 1.0).unwrap();
        s.accumulate(0, 2, 0.0).unwrap();
        let eps = FLOOR_SCALE / 3.0;
        assert!(close(
            &mle_theta(&s, 0).unwrap(),
            &[eps, 1.0 - 2.0 * eps, eps],
            1e-12
        ));

        let mut s = StratumStats::new(2);
        s.accumulate(0, 0, 2.0).unwrap();
        s.accumulate(0, 0, -2.0).unwrap();
        s.accumulate(0, 1, 1.0).unwrap();
        assert!(close(
            &mle_theta(&s, 0).unwrap(),
            &[2.0 / 3.0, 1.0 / 3.0],
            1e-15
        ));
    }

    #[test]
    fn empty_strata_get_the_mean_observed_weight() {
        let mut s = StratumStats::new(3);
        s.accumulate(1, 0, 1.0).unwrap();
        s.accumulate(1, 2, 3.0).unwrap();
        // weights (1, 2, 3) normalised
        assert!(close(
            &mle_theta(&s, 1).unwrap(),
            &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0],
            1e-15
        ));
        assert!(matches!(
            mle_theta(&s, 0),
            Err(Error::InsufficientData { player: 0 })
        ));
    }

    #[test]
    fn all_zero_observations_give_uniform() {
        let mut s = StratumStats::new(4);
        s.accumulate(3, 1, 0.0).unwrap();
        assert!(close(&mle_theta(&s, 3).unwrap(), &[0.25; 4], 0.0));
    }

    #[test]
    fn map_examples() {
        let w = [0.5, 0.3, 0.2];
        assert!(close(&map_theta(&w, 0.0).unwrap(), &w, 1e-15));
        let t = map_theta(&w, 2.0).unwrap();
        assert!(close(&t, &[3.5 / 9.0, 2.9 / 9.0, 2.6 / 9.0], 1e-15));
        let t = map_theta(&[1.0, 0.0, 0.0], 1e6).unwrap();
        assert!(close(&t, &[1.0 / 3.0; 3], 1e-3));
        assert!(map_theta(&w, -0.1).is_err());
    }

    #[test]
    fn oracle_examples() {
        let add = make_synthetic(&SyntheticGame::Additive {
            weights: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        let prof = exact_moments(&add).unwrap();
        for i in 0..3 {
            assert!(close(
                &oracle_theta(&prof, i).unwrap(),
                &[1.0 / 3.0; 3],
                1e-15
            ));
        }
        let eps = FLOOR_SCALE / 3.0;
        let maj = make_synthetic(&SyntheticGame::Majority { n: 3, quota: None }).unwrap();
        let prof = exact_moments(&maj).unwrap();
        assert!(close(
            &oracle_theta(&prof, 0).unwrap(),
            &[eps, 1.0 - 2.0 * eps, eps],
            1e-12
        ));
        let glove = make_synthetic(&SyntheticGame::Glove {
            left: vec![0, 1],
            right: vec![2],
        })
        .unwrap();
        let prof = exact_moments(&glove).unwrap();
        let t = oracle_theta(&prof, 2).unwrap();
        assert!(close(&t, &[eps, 0.5 - eps / 2.0, 0.5 - eps / 2.0], 1e-12));
    }

    #[test]
    fn null_player_oracle_is_uniform() {
        let add = make_synthetic(&SyntheticGame::Additive {
            weights: vec![1.0, 0.0],
        })
        .unwrap();
        let prof = exact_moments(&add).unwrap();
        assert_eq!(oracle_theta(&prof, 1).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_proposal_variance_is_the_plain_variance() {
        let g = make_synthetic(&SyntheticGame::Glove {
            left: vec![0, 1],
            right: vec![2],
        })
        .unwrap();
        let prof = exact_moments(&g).unwrap();
        for i in 0..3 {
            let v = proposal_variance(&[1.0 / 3.0; 3], &prof, i).unwrap();
            assert!((v - prof.variance_uniform[i]).abs() < 1e-15);
        }
        assert!(proposal_variance(&[0.5, 0.5, 0.0], &prof, 0).is_err());
    }

    #[test]
    fn additive_game_is_only_zero_variance_under_uniform() {
        let add = make_synthetic(&SyntheticGame::Additive {
            weights: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        let prof = exact_moments(&add).unwrap();
        let uniform = proposal_variance(&[1.0 / 3.0; 3], &prof, 1).unwrap();
        assert!(uniform.abs() < 1e-12);
        let skewed = floor_and_normalise(&[0.6, 0.3, 0.1]);
        assert!(proposal_variance(&skewed, &prof, 1).unwrap() > 1e-3);
    }
}
