use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest player count a bitmask coalition can address.
pub const MAX_PLAYERS: usize = 64;

/// A set of players encoded as a bitmask; bit `i` set means player `i` is a member.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    /// The grand coalition of `n` players.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_PLAYERS);
        if n >= 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn from_players<I: IntoIterator<Item = usize>>(players: I) -> Self {
        let mut bits = 0u64;
        for p in players {
            debug_assert!(p < MAX_PLAYERS);
            bits |= 1u64 << p;
        }
        Coalition(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, player: usize) -> bool {
        player < 64 && self.0 & (1u64 << player) != 0
    }

    #[must_use]
    pub const fn with(self, player: usize) -> Self {
        Coalition(self.0 | (1u64 << player))
    }

    #[must_use]
    pub const fn without(self, player: usize) -> Self {
        Coalition(self.0 & !(1u64 << player))
    }

    #[must_use]
    pub const fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    /// Checks that every member index is below `n`.
    pub fn validate(self, n: usize) -> Result<()> {
        if n < 64 && self.0 >> n != 0 {
            return Err(Error::InvalidCoalition { mask: self.0, n });
        }
        Ok(())
    }

    pub fn players(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(i)
        })
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.players()).finish()
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Coalition::from_players(iter)
    }
}

/// Iterates over every subset of `mask` (including the empty set and `mask` itself).
pub(crate) fn subsets(mask: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(0u64);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask {
            None
        } else {
            Some((cur.wrapping_sub(mask)) & mask)
        };
        Some(cur)
    })
}
