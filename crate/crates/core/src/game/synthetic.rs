use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CooperativeGame, GameTable, Utility, TABLE_MAX_PLAYERS};
use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::sampler::RngStream;

/// Built-in game families with known or brute-forceable Shapley values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SyntheticGame {
    /// `v(S) = Σ_{i∈S} w_i`; `φ = w`.
    Additive { weights: Vec<f64> },
    /// `v(S) = 1` iff `|S| ≥ quota` (default `⌊n/2⌋ + 1`).
    Majority {
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quota: Option<usize>,
    },
    /// `v(S) = min(|S∩L|, |S∩R|)`.
    Glove { left: Vec<usize>, right: Vec<usize> },
    /// Cost-sharing game `v(S) = max_{i∈S} c_i`, `v(∅) = 0`.
    Airport { costs: Vec<f64> },
    /// Dense table with every coalition value drawn uniformly from `[low, high]`.
    Random {
        n: usize,
        seed: u64,
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default = "default_high")]
        high: f64,
    },
    /// Each player contributes `a_i · (1 + b_i·x)` where `x` is the fraction of
    /// the other players already present. `b_i` controls how strongly the
    /// contribution depends on the predecessor count, and `noise` adds a
    /// coalition-specific perturbation on top.
    Heterogeneous {
        base: Vec<f64>,
        slope: Vec<f64>,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `2n` players where player `n+i` is a functional clone of player `i`.
    Duplicated { base: Box<SyntheticGame> },
}

fn default_low() -> f64 {
    -1.0
}

fn default_high() -> f64 {
    1.0
}

impl SyntheticGame {
    pub fn n(&self) -> usize {
        match self {
            SyntheticGame::Additive { weights } => weights.len(),
            SyntheticGame::Majority { n, .. } | SyntheticGame::Random { n, .. } => *n,
            SyntheticGame::Glove { left, right } => {
                left.iter().chain(right).copied().max().map_or(0, |m| m + 1)
            }
            SyntheticGame::Airport { costs } => costs.len(),
            SyntheticGame::Heterogeneous { base, .. } => base.len(),
            SyntheticGame::Duplicated { base } => 2 * base.n(),
        }
    }

    /// Closed-form Shapley values for the families that have one.
    pub fn closed_form_shapley(&self) -> Option<Vec<f64>> {
        match self {
            SyntheticGame::Additive { weights } => Some(weights.clone()),
            SyntheticGame::Majority { n, quota } => {
                let q = quota.unwrap_or(n / 2 + 1);
                let share = if q <= *n && q > 0 {
                    1.0 / *n as f64
                } else {
                    0.0
                };
                Some(vec![share; *n])
            }
            SyntheticGame::Airport { costs } => {
                // Shares of each cost increment are split among everyone at least that expensive.
                let n = costs.len();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
                let mut phi = vec![0.0; n];
                let mut acc = 0.0;
                let mut prev = 0.0;
                for (rank, &p) in order.iter().enumerate() {
                    acc += (costs[p] - prev) / (n - rank) as f64;
                    prev = costs[p];
                    phi[p] = acc;
                }
                Some(phi)
            }
            _ => None,
        }
    }
}

/// Builds a game from a synthetic family.
pub fn make_synthetic(spec: &SyntheticGame) -> Result<CooperativeGame> {
    let utility = build(spec)?;
    let label = family_name(spec);
    let mut game = CooperativeGame::new(label, utility)?;
    if let SyntheticGame::Duplicated { base } = spec {
        let n = base.n();
        game = game.with_clone_pairs((0..n).map(|i| (i, n + i)).collect());
    }
    Ok(game)
}

fn family_name(spec: &SyntheticGame) -> String {
    match spec {
        SyntheticGame::Additive { .. } => "additive".into(),
        SyntheticGame::Majority { .. } => "majority".into(),
        SyntheticGame::Glove { .. } => "glove".into(),
        SyntheticGame::Airport { .. } => "airport".into(),
        SyntheticGame::Random { .. } => "random".into(),
        SyntheticGame::Heterogeneous { .. } => "heterogeneous".into(),
        SyntheticGame::Duplicated { base } => format!("duplicated({})", family_name(base)),
    }
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        return Err(Error::Capacity {
            what: "synthetic game",
            max,
            n,
        });
    }
    Ok(())
}

fn build(spec: &SyntheticGame) -> Result<Box<dyn Utility>> {
    match spec {
        SyntheticGame::Additive { weights } => {
            check_n(weights.len(), MAX_PLAYERS)?;
            if weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidArgument(
                    "additive weights must be finite".into(),
                ));
            }
            Ok(Box::new(Additive {
                weights: weights.clone(),
            }))
        }
        SyntheticGame::Majority { n, quota } => {
            check_n(*n, MAX_PLAYERS)?;
            Ok(Box::new(Majority {
                n: *n,
                quota: quota.unwrap_or(n / 2 + 1),
            }))
        }
        SyntheticGame::Glove { left, right } => {
            let n = spec.n();
            check_n(n, MAX_PLAYERS)?;
            let l = Coalition::from_players(left.iter().copied());
            let r = Coalition::from_players(right.iter().copied());
            if l.bits() & r.bits() != 0 {
                return Err(Error::InvalidArgument(
                    "glove sides must be disjoint".into(),
                ));
            }
            if l.len() + r.len() != n {
                return Err(Error::InvalidArgument(
                    "glove players must be numbered 0..n without gaps".into(),
                ));
            }
            Ok(Box::new(Glove {
                n,
                left: l.bits(),
                right: r.bits(),
            }))
        }
        SyntheticGame::Airport { costs } => {
            check_n(costs.len(), MAX_PLAYERS)?;
            if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::InvalidArgument(
                    "airport costs must be finite and non-negative".into(),
                ));
            }
            Ok(Box::new(Airport {
                costs: costs.clone(),
            }))
        }
        SyntheticGame::Random { n, seed, low, high } => {
            check_n(*n, TABLE_MAX_PLAYERS)?;
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(Error::InvalidArgument(format!(
                    "random game needs finite low < high, got [{low}, {high}]"
                )));
            }
            let mut rng = RngStream::new(*seed, 0);
            let values = (0..1u64 << n)
                .map(|_| rng.random_range(*low..*high))
                .collect();
            Ok(Box::new(GameTable::new(*n, values)?))
        }
        SyntheticGame::Heterogeneous {
            base,
            slope,
            noise,
            seed,
        } => {
            let n = base.len();
            check_n(n, MAX_PLAYERS)?;
            if slope.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: slope.len(),
                });
            }
            if base.iter().chain(slope).any(|x| !x.is_finite())
                || !noise.is_finite()
                || *noise < 0.0
            {
                return Err(Error::InvalidArgument(
                    "heterogeneous parameters must be finite, noise >= 0".into(),
                ));
            }
            Ok(Box::new(Heterogeneous {
                base: base.clone(),
                slope: slope.clone(),
                noise: *noise,
                seed: *seed,
            }))
        }
        SyntheticGame::Duplicated { base } => {
            let inner = build(base)?;
            let n = inner.n();
            check_n(2 * n, MAX_PLAYERS)?;
            Ok(Box::new(Duplicated { inner, n }))
        }
    }
}

struct Additive {
    weights: Vec<f64>,
}

impl Utility for Additive {
    fn n(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        Ok(c.players().map(|i| self.weights[i]).sum())
    }
}

struct Majority {
    n: usize,
    quota: usize,
}

impl Utility for Majority {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        Ok(if c.len() >= self.quota { 1.0 } else { 0.0 })
    }
}

struct Glove {
    n: usize,
    left: u64,
    right: u64,
}

impl Utility for Glove {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        let l = (c.bits() & self.left).count_ones();
        let r = (c.bits() & self.right).count_ones();
        Ok(l.min(r) as f64)
    }
}

struct Airport {
    costs: Vec<f64>,
}

impl Utility for Airport {
    fn n(&self) -> usize {
        self.costs.len()
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        Ok(c.players().map(|i| self.costs[i]).fold(0.0, f64::max))
    }
}

struct Heterogeneous {
    base: Vec<f64>,
    slope: Vec<f64>,
    noise: f64,
    seed: u64,
}

impl Heterogeneous {
    /// Deterministic pseudo-random value in [-1, 1) keyed by coalition.
    fn jitter(&self, bits: u64) -> f64 {
        let mut z = bits ^ self.seed.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }
}

impl Utility for Heterogeneous {
    fn n(&self) -> usize {
        self.base.len()
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        let n = self.base.len();
        if c.is_empty() {
            return Ok(0.0);
        }
        let denom = (n.max(2) - 1) as f64;
        let k = c.len() as f64;
        // Member i sees the other k-1 members as already present.
        let structured: f64 = c
            .players()
            .map(|i| self.base[i] * (1.0 + self.slope[i] * (k - 1.0) / denom))
            .sum();
        Ok(structured + self.noise * self.jitter(c.bits()))
    }
}

struct Duplicated {
    inner: Box<dyn Utility>,
    n: usize,
}

impl Utility for Duplicated {
    fn n(&self) -> usize {
        2 * self.n
    }

    fn value(&self, c: Coalition) -> Result<f64> {
        let low = (1u64 << self.n) - 1;
        let collapsed = (c.bits() & low) | (c.bits() >> self.n);
        self.inner.value(Coalition::from_bits(collapsed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_collapses_clones_exhaustively() {
        for base_n in 1..=8 {
            let base_spec = SyntheticGame::Random {
                n: base_n,
                seed: base_n as u64,
                low: -1.0,
                high: 1.0,
            };
            let base = make_synthetic(&base_spec).unwrap();
            let dup = make_synthetic(&SyntheticGame::Duplicated {
                base: Box::new(base_spec),
            })
            .unwrap();
            assert_eq!(dup.n(), 2 * base_n);
            assert_eq!(dup.clone_pairs().len(), base_n);
            let low = (1u64 << base_n) - 1;
            for bits in 0..1u64 << (2 * base_n) {
                let collapsed = (bits & low) | (bits >> base_n);
                let a = dup.evaluate(Coalition::from_bits(bits)).unwrap();
                let b = base.evaluate(Coalition::from_bits(collapsed)).unwrap();
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn unsupported_sizes_are_rejected() {
        assert!(make_synthetic(&SyntheticGame::Majority { n: 0, quota: None }).is_err());
        assert!(make_synthetic(&SyntheticGame::Majority { n: 65, quota: None }).is_err());
        assert!(make_synthetic(&SyntheticGame::Random {
            n: 21,
            seed: 0,
            low: -1.0,
            high: 1.0
        })
        .is_err());
        let big = SyntheticGame::Majority { n: 40, quota: None };
        assert!(make_synthetic(&SyntheticGame::Duplicated {
            base: Box::new(big)
        })
        .is_err());
    }

    #[test]
    fn glove_validation() {
        assert!(make_synthetic(&SyntheticGame::Glove {
            left: vec![0, 1],
            right: vec![1]
        })
        .is_err());
        assert!(make_synthetic(&SyntheticGame::Glove {
            left: vec![0],
            right: vec![3]
        })
        .is_err());
    }

    #[test]
    fn airport_closed_form_matches_hand_computation() {
        // costs 1, 3, 6: shares 1/3, 1/3 + 2/2, 1/3 + 1 + 3
        let phi = SyntheticGame::Airport {
            costs: vec![3.0, 1.0, 6.0],
        }
        .closed_form_shapley()
        .unwrap();
        let expected = [1.0 / 3.0 + 1.0, 1.0 / 3.0, 1.0 / 3.0 + 1.0 + 3.0];
        for (a, b) in phi.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_game_is_reproducible() {
        let spec = SyntheticGame::Random {
            n: 5,
            seed: 42,
            low: -1.0,
            high: 1.0,
        };
        let a = make_synthetic(&spec).unwrap().to_table().unwrap();
        let b = make_synthetic(&spec).unwrap().to_table().unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn config_form_parses() {
        let spec: SyntheticGame = serde_json::from_str(
            r#"{"family":"duplicated","base":{"family":"glove","left":[0,1],"right":[2]}}"#,
        )
        .unwrap();
        assert_eq!(spec.n(), 6);
    }
}
