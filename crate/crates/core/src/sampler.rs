//! Seedable permutation and placement sampling.
//!
//! Randomness comes from ChaCha8 (`rand_chacha` 0.9, pinned exactly in the
//! manifest) keyed by a 64-bit seed and a 64-bit stream id, so every
//! `(seed, stream_id)` pair yields the same sequence on every platform.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalition::Coalition;
use crate::error::{Error, Result};

/// Tolerance on `Σθ = 1` when validating a cardinality distribution.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// An independent random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    /// Stream for `slot` (usually a player index) within `trial`.
    pub fn for_trial(seed: u64, trial: u32, slot: u32) -> Self {
        RngStream::new(seed, (u64::from(trial) << 32) | u64::from(slot))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// A validated probability vector over predecessor cardinalities `0..n`.
#[derive(Clone, Debug)]
pub struct CardinalityDist {
    probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl CardinalityDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is negative or non-finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, not 1"
            )));
        }
        let index =
            WeightedIndex::new(&probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(CardinalityDist { probs, index })
    }

    pub fn uniform(n: usize) -> Self {
        CardinalityDist::new(vec![1.0 / n as f64; n]).expect("uniform distribution is valid")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        self.index.sample(rng)
    }
}

/// Player `player` inserted after a uniformly chosen predecessor set of size `cardinality`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub player: usize,
    pub cardinality: usize,
    pub predecessors: Coalition,
}

/// Fisher–Yates shuffle of `0..n`; every ordering has probability `1/n!`.
pub fn sample_uniform_permutation(rng: &mut RngStream, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Predecessors of `player` in `order`.
pub fn predecessors_in(order: &[usize], player: usize) -> Coalition {
    order
        .iter()
        .take_while(|&&p| p != player)
        .copied()
        .collect()
}

/// Draws `c ∼ theta`, then a uniform size-`c` subset of the other players.
///
/// The induced distribution over orderings is `theta(|P|) / (n-1)!`.
pub fn sample_placement(
    rng: &mut RngStream,
    player: usize,
    n: usize,
    theta: &CardinalityDist,
) -> Result<Placement> {
    if theta.len() != n {
        return Err(Error::InvalidDistribution(format!(
            "theta has {} entries, expected {n}",
            theta.len()
        )));
    }
    if player >= n {
        return Err(Error::InvalidArgument(format!(
            "player {player} out of range for n={n}"
        )));
    }
    let cardinality = theta.sample(rng);
    Ok(Placement {
        player,
        cardinality,
        predecessors: random_subset(rng, player, n, cardinality),
    })
}

/// Uniform size-`size` subset of `{0..n} \ {player}` by partial Fisher–Yates.
pub(crate) fn random_subset(
    rng: &mut RngStream,
    player: usize,
    n: usize,
    size: usize,
) -> Coalition {
    let mut others: Vec<usize> = (0..n).filter(|&p| p != player).collect();
    let (chosen, _) = others.partial_shuffle(rng, size);
    chosen.iter().copied().collect()
}

/// `1 / (n · theta(c))`; equals 1 for the uniform distribution.
pub fn importance_weight(theta: &[f64], cardinality: usize, n: usize) -> Result<f64> {
    let p = *theta.get(cardinality).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "cardinality {cardinality} outside 0..{}",
            theta.len()
        ))
    })?;
    if p <= 0.0 {
        return Err(Error::ZeroProbability { cardinality });
    }
    Ok(1.0 / (n as f64 * p))
}
