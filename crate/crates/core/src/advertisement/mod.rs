//! Data advertisement: bitmaps in canonical global order, rarity surveys
//! and rarest-piece-first request selection.

mod bitmap;
mod history;
mod rarity;
mod strategy;

pub use bitmap::{Bitmap, GlobalOrdering};
pub use history::{EncounterHistory, DEFAULT_HISTORY_CAPACITY};
pub use rarity::{rarity_encounter, rarity_local, AdvertisementError, RarityVector};
pub use strategy::{next_request, next_request_where, RpfStrategy};

pub use crate::analysis::rpf_effectiveness;

use crate::collection::CollectionMetadata;

/// All-zero bitmap sized for the collection described by `md`.
pub fn bitmap_from_metadata(md: &CollectionMetadata) -> Bitmap {
    Bitmap::new(md.collection.clone(), md.total_packets())
}
