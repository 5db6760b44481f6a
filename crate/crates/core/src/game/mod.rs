//! Cooperative games: a player set plus a characteristic function `v`.
//!
//! Every game is wrapped in [`CooperativeGame`], which validates coalitions,
//! memoises `v` and counts distinct evaluations. The utility itself comes from
//! a built-in synthetic family, a dense table, or an external process.

mod subprocess;
mod synthetic;
mod table;

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;

use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::{Error, Result};

pub use subprocess::{SubprocessUtility, DEFAULT_QUERY_TIMEOUT};
pub use synthetic::{make_synthetic, SyntheticGame};
pub use table::{load_table, save_table, GameTable, TABLE_FORMAT, TABLE_MAX_PLAYERS};

/// A deterministic characteristic function over `n` players.
///
/// Implementations must be safe for concurrent read-only calls.
pub trait Utility: Send + Sync {
    fn n(&self) -> usize;

    /// Returns `v(c)`. The caller guarantees `c` is valid for `n()`.
    fn value(&self, c: Coalition) -> Result<f64>;
}

/// A game with memoised, counted evaluation of its characteristic function.
pub struct CooperativeGame {
    n: usize,
    label: String,
    utility: Box<dyn Utility>,
    memo: DashMap<u64, f64>,
    evals: AtomicU64,
    clone_pairs: Vec<(usize, usize)>,
}

impl std::fmt::Debug for CooperativeGame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CooperativeGame")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl CooperativeGame {
    pub fn new(label: impl Into<String>, utility: Box<dyn Utility>) -> Result<Self> {
        let n = utility.n();
        if n == 0 || n > MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "cooperative game",
                max: MAX_PLAYERS,
                n,
            });
        }
        Ok(CooperativeGame {
            n,
            label: label.into(),
            utility,
            memo: DashMap::new(),
            evals: AtomicU64::new(0),
            clone_pairs: Vec::new(),
        })
    }

    /// Declares pairs of players known to be functional clones of each other.
    pub fn with_clone_pairs(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.clone_pairs = pairs;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Clone pairs recorded at construction (empty unless the game was built by duplication).
    pub fn clone_pairs(&self) -> &[(usize, usize)] {
        &self.clone_pairs
    }

    /// Number of distinct coalitions whose utility has been computed.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Returns `v(c)`, consulting the memo first.
    pub fn evaluate(&self, c: Coalition) -> Result<f64> {
        c.validate(self.n)?;
        if let Some(v) = self.memo.get(&c.bits()) {
            return Ok(*v);
        }
        let v = self.utility.value(c)?;
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "utility of {c:?} is not finite ({v})"
            )));
        }
        // Two threads may race on the same miss; only the one that inserts counts it.
        if let dashmap::Entry::Vacant(slot) = self.memo.entry(c.bits()) {
            slot.insert(v);
            self.evals.fetch_add(1, Ordering::Relaxed);
        }
        Ok(v)
    }

    /// `v(predecessors ∪ {i}) − v(predecessors)`.
    pub fn marginal_contribution(&self, player: usize, predecessors: Coalition) -> Result<f64> {
        if player >= self.n {
            return Err(Error::InvalidArgument(format!(
                "player {player} out of range for n={}",
                self.n
            )));
        }
        if predecessors.contains(player) {
            return Err(Error::InvalidArgument(format!(
                "player {player} is already in the predecessor set {predecessors:?}"
            )));
        }
        Ok(self.evaluate(predecessors.with(player))? - self.evaluate(predecessors)?)
    }

    /// Materialises the full table of `2^n` values.
    pub fn to_table(&self) -> Result<GameTable> {
        if self.n > TABLE_MAX_PLAYERS {
            return Err(Error::Capacity {
                what: "game table",
                max: TABLE_MAX_PLAYERS,
                n: self.n,
            });
        }
        let values = (0..1u64 << self.n)
            .map(|bits| self.evaluate(Coalition::from_bits(bits)))
            .collect::<Result<Vec<_>>>()?;
        GameTable::new(self.n, values)
    }
}

/// Wraps an external process speaking the line protocol as a game.
pub fn subprocess_game(
    command: &[String],
    n: usize,
    timeout: std::time::Duration,
) -> Result<CooperativeGame> {
    let utility = SubprocessUtility::spawn(command, n, timeout)?;
    CooperativeGame::new(
        format!("subprocess:{}", command.join(" ")),
        Box::new(utility),
    )
}
