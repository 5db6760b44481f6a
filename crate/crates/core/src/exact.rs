//! Brute-force ground truth: exact Shapley values, per-cardinality moments of
//! the marginal contributions, and exhaustive checks of the symmetry and
//! strict-desirability clauses.

use serde::{Deserialize, Serialize};

use crate::coalition::{subsets, Coalition};
use crate::error::{Error, Result};
use crate::game::CooperativeGame;

/// Largest n for permutation enumeration and moment computation.
pub const PERMUTATION_MAX_PLAYERS: usize = 10;
/// Largest n for the subset formula and clause checks.
pub const SUBSET_MAX_PLAYERS: usize = 20;
/// Absolute tolerance used when comparing utilities in clause checks.
pub const CLAUSE_TOL: f64 = 1e-12;

/// Exact Shapley values and marginal-contribution moments for every player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactProfile {
    pub phi: Vec<f64>,
    /// `E[σ_i²] − φ_i²` under uniform permutations.
    pub variance_uniform: Vec<f64>,
    /// `[i][c] = E_{U_c}[σ_i]`.
    pub mean_by_cardinality: Vec<Vec<f64>>,
    /// `[i][c] = E_{U_c}[σ_i²]`.
    pub mean_sq_by_cardinality: Vec<Vec<f64>>,
}

impl ExactProfile {
    pub fn n(&self) -> usize {
        self.phi.len()
    }
}

/// Outcome of the pairwise clause checks for `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomClauses {
    pub symmetric: bool,
    /// `i` is strictly more desirable than `j`.
    pub strictly_desirable: bool,
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// The full value table of a small game, materialised once for repeated queries.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    n: usize,
    values: Vec<f64>,
}

impl ExactOracle {
    pub fn from_game(game: &CooperativeGame) -> Result<Self> {
        let n = game.n();
        if n > SUBSET_MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "exact oracle",
                max: SUBSET_MAX_PLAYERS,
                n,
            });
        }
        let values = game.to_table()?.values().to_vec();
        Ok(ExactOracle { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `v(S)` indexed by the coalition bitmask.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn v(&self, bits: u64) -> f64 {
        self.values[bits as usize]
    }

    fn sigma(&self, player: usize, pred: u64) -> f64 {
        self.v(pred | (1 << player)) - self.v(pred)
    }

    /// Averages every marginal contribution over all `n!` orderings.
    pub fn shapley_by_permutations(&self) -> Result<Vec<f64>> {
        let n = self.n;
        if n > PERMUTATION_MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "permutation enumeration",
                max: PERMUTATION_MAX_PLAYERS,
                n,
            });
        }
        let mut sums = vec![CompensatedSum::default(); n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut visit = |order: &[usize]| {
            let mut prefix = 0u64;
            for &p in order {
                sums[p].add(self.sigma(p, prefix));
                prefix |= 1 << p;
            }
        };
        // Heap's algorithm, iterative form.
        let mut counters = vec![0usize; n];
        visit(&order);
        let mut k = 1;
        while k < n {
            if counters[k] < k {
                if k % 2 == 0 {
                    order.swap(0, k);
                } else {
                    order.swap(counters[k], k);
                }
                visit(&order);
                counters[k] += 1;
                k = 1;
            } else {
                counters[k] = 0;
                k += 1;
            }
        }
        let total: f64 = (1..=n).map(|k| k as f64).product();
        Ok(sums.into_iter().map(|s| s.value() / total).collect())
    }

    /// `φ_i = Σ_{S ⊆ N∖{i}} |S|!(n−1−|S|)!/n! · σ_i(S)`, evaluated as the
    /// average over cardinalities of the mean `σ_i` within each cardinality.
    pub fn shapley_by_subsets(&self) -> Vec<f64> {
        let n = self.n;
        let full = (1u64 << n) - 1;
        (0..n)
            .map(|i| {
                let mut by_c = vec![CompensatedSum::default(); n];
                for s in subsets(full & !(1 << i)) {
                    by_c[s.count_ones() as usize].add(self.sigma(i, s));
                }
                let mut acc = CompensatedSum::default();
                for (c, sum) in by_c.iter().enumerate() {
                    acc.add(sum.value() / binomial(n - 1, c));
                }
                acc.value() / n as f64
            })
            .collect()
    }

    /// Per-player, per-cardinality first and second moments of `σ`.
    pub fn moments(&self) -> Result<ExactProfile> {
        let n = self.n;
        if n > PERMUTATION_MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "exact moments",
                max: PERMUTATION_MAX_PLAYERS,
                n,
            });
        }
        let phi = self.shapley_by_subsets();
        let full = (1u64 << n) - 1;
        let mut mean_by_c = vec![vec![0.0; n]; n];
        let mut mean_sq_by_c = vec![vec![0.0; n]; n];
        let mut variance = vec![0.0; n];
        for i in 0..n {
            let mut s1 = vec![CompensatedSum::default(); n];
            let mut s2 = vec![CompensatedSum::default(); n];
            for s in subsets(full & !(1 << i)) {
                let c = s.count_ones() as usize;
                let sig = self.sigma(i, s);
                s1[c].add(sig);
                s2[c].add(sig * sig);
            }
            for c in 0..n {
                let count = binomial(n - 1, c);
                mean_by_c[i][c] = s1[c].value() / count;
                mean_sq_by_c[i][c] = s2[c].value() / count;
            }
            let second: f64 = mean_sq_by_c[i].iter().sum::<f64>() / n as f64;
            variance[i] = (second - phi[i] * phi[i]).max(0.0);
        }
        Ok(ExactProfile {
            phi,
            variance_uniform: variance,
            mean_by_cardinality: mean_by_c,
            mean_sq_by_cardinality: mean_sq_by_c,
        })
    }

    pub fn check_axiom_clauses(&self, i: usize, j: usize) -> Result<AxiomClauses> {
        let n = self.n;
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "clause check needs distinct players, got {i} twice"
            )));
        }
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "players ({i}, {j}) out of range for n={n}"
            )));
        }
        let rest = ((1u64 << n) - 1) & !(1 << i) & !(1 << j);
        let mut symmetric = true;
        let mut weakly_above = true;
        let mut strictly_somewhere = false;
        for c in subsets(rest) {
            let vi = self.v(c | (1 << i));
            let vj = self.v(c | (1 << j));
            if (vi - vj).abs() > CLAUSE_TOL {
                symmetric = false;
            }
            if vi > vj + CLAUSE_TOL {
                strictly_somewhere = true;
            }
            if vi < vj - CLAUSE_TOL {
                weakly_above = false;
            }
        }
        Ok(AxiomClauses {
            symmetric,
            strictly_desirable: weakly_above && strictly_somewhere,
        })
    }

    /// Unordered pairs `(i, j)`, `i < j`, satisfying the symmetry clause.
    pub fn symmetric_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self
                    .check_axiom_clauses(i, j)
                    .map(|c| c.symmetric)
                    .unwrap_or(false)
                {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Ordered pairs `(i, j)` where `i` is strictly more desirable than `j`.
    pub fn desirable_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j
                    && self
                        .check_axiom_clauses(i, j)
                        .map(|c| c.strictly_desirable)
                        .unwrap_or(false)
                {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k)
        .fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
        .round()
}

/// Exact Shapley values by enumerating all orderings (n ≤ 10).
pub fn exact_shapley_permutations(game: &CooperativeGame) -> Result<Vec<f64>> {
    if game.n() > PERMUTATION_MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "permutation enumeration",
            max: PERMUTATION_MAX_PLAYERS,
            n: game.n(),
        });
    }
    ExactOracle::from_game(game)?.shapley_by_permutations()
}

/// Exact Shapley values by the weighted subset formula (n ≤ 20).
pub fn exact_shapley_subsets(game: &CooperativeGame) -> Result<Vec<f64>> {
    Ok(ExactOracle::from_game(game)?.shapley_by_subsets())
}

/// Exact per-cardinality moments of the marginal contributions (n ≤ 10).
pub fn exact_moments(game: &CooperativeGame) -> Result<ExactProfile> {
    if game.n() > PERMUTATION_MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "exact moments",
            max: PERMUTATION_MAX_PLAYERS,
            n: game.n(),
        });
    }
    ExactOracle::from_game(game)?.moments()
}

pub fn check_axiom_clauses(game: &CooperativeGame, i: usize, j: usize) -> Result<AxiomClauses> {
    ExactOracle::from_game(game)?.check_axiom_clauses(i, j)
}

/// Marginal contribution of `player` to an explicit predecessor coalition, read from a table.
pub fn sigma_from_table(values: &[f64], player: usize, predecessors: Coalition) -> f64 {
    let p = predecessors.bits();
    values[(p | (1 << player)) as usize] - values[p as usize]
}
