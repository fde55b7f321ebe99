use std::collections::VecDeque;

use super::bitmap::Bitmap;

pub const DEFAULT_HISTORY_CAPACITY: usize = 20;

/// Bitmaps of recently encountered peers, newest last. A peer appears at
/// most once; a new snapshot replaces the old one.
#[derive(Debug, Clone)]
pub struct EncounterHistory {
    capacity: usize,
    entries: VecDeque<(u64, Bitmap, f64)>,
}

impl EncounterHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn record(&mut self, peer: u64, bitmap: Bitmap, at: f64) {
        if let Some(pos) = self.entries.iter().position(|(p, _, _)| *p == peer) {
            self.entries.remove(pos);
        }
        self.entries.push_back((peer, bitmap, at));
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    pub fn bitmaps(&self) -> impl Iterator<Item = &Bitmap> {
        self.entries.iter().map(|(_, b, _)| b)
    }

    pub fn peers(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(p, _, _)| *p)
    }
}

impl Default for EncounterHistory {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY_CAPACITY)
    }
}
