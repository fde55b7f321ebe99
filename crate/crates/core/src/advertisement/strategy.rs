use std::collections::BTreeSet;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::bitmap::Bitmap;
use super::rarity::RarityVector;

/// Which bitmaps a rarest-piece-first estimate surveys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RpfStrategy {
    /// Bitmaps of peers currently in range.
    #[default]
    Local,
    /// Bitmaps from the encounter history.
    Encounter,
}

/// Picks the rarest packet that is missing and not in flight.
pub fn next_request(
    own: &Bitmap,
    rarity: &RarityVector,
    in_flight: &BTreeSet<usize>,
    rng: &mut dyn RngCore,
    random_start: bool,
) -> Option<usize> {
    next_request_where(own, rarity, |g| !in_flight.contains(&g), rng, random_start)
}

/// As [`next_request`] with an arbitrary eligibility filter applied to
/// missing packets. Ties go to the lowest index, or to a uniform choice
/// among the tied maxima when `random_start` is set.
pub fn next_request_where(
    own: &Bitmap,
    rarity: &RarityVector,
    eligible: impl Fn(usize) -> bool,
    rng: &mut dyn RngCore,
    random_start: bool,
) -> Option<usize> {
    assert_eq!(own.len(), rarity.len(), "rarity length mismatch");
    let mut best = 0u32;
    let mut tied: Vec<usize> = Vec::new();
    own.for_each_zero(|g| {
        if !eligible(g) {
            return;
        }
        let s = rarity.scores[g];
        if tied.is_empty() || s > best {
            best = s;
            tied.clear();
            tied.push(g);
        } else if s == best && random_start {
            tied.push(g);
        }
    });
    match tied.len() {
        0 => None,
        1 => Some(tied[0]),
        n => Some(tied[rng.gen_range(0..n)]),
    }
}
