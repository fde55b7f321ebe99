use std::num::NonZeroUsize;

use lru::LruCache;

use crate::name::Name;
use crate::packet::Data;

/// Exact-match packet cache with least-recently-used eviction.
pub struct ContentStore {
    entries: LruCache<Name, Data>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Self {
            entries: LruCache::new(cap),
        }
    }

    pub fn capacity(&self) -> usize {
        self.entries.cap().get()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or refreshes `data`; returns the evicted entry's name, if any.
    pub fn insert(&mut self, data: Data) -> Option<Name> {
        let name = data.name.clone();
        match self.entries.push(name.clone(), data) {
            Some((evicted, _)) if evicted != name => Some(evicted),
            _ => None,
        }
    }

    pub fn lookup(&mut self, name: &Name) -> Option<&Data> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains(name)
    }
}
