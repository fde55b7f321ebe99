use thiserror::Error;

use super::bitmap::Bitmap;
use super::history::EncounterHistory;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdvertisementError {
    #[error("bitmap length {found} does not match {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Per packet, the number of surveyed bitmaps that lack it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RarityVector {
    pub scores: Vec<u32>,
    pub surveyed: u32,
}

impl RarityVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

fn survey<'a>(
    own: &'a Bitmap,
    others: impl IntoIterator<Item = &'a Bitmap>,
) -> Result<RarityVector, AdvertisementError> {
    let mut scores = vec![0u32; own.len()];
    let mut surveyed = 0;
    for b in std::iter::once(own).chain(others) {
        if b.len() != own.len() {
            return Err(AdvertisementError::LengthMismatch {
                expected: own.len(),
                found: b.len(),
            });
        }
        surveyed += 1;
        b.for_each_zero(|g| scores[g] += 1);
    }
    Ok(RarityVector { scores, surveyed })
}

/// Rarity over the current neighbors plus the own bitmap.
pub fn rarity_local<'a>(
    own: &'a Bitmap,
    neighbors: impl IntoIterator<Item = &'a Bitmap>,
) -> Result<RarityVector, AdvertisementError> {
    survey(own, neighbors)
}

/// Rarity over the encounter history plus the own bitmap.
pub fn rarity_encounter(
    own: &Bitmap,
    hist: &EncounterHistory,
) -> Result<RarityVector, AdvertisementError> {
    survey(own, hist.bitmaps())
}
