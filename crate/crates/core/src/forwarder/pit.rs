use std::collections::{BTreeMap, BTreeSet};

use crate::name::Name;

use super::FaceId;

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub in_faces: BTreeSet<FaceId>,
    pub expiry: f64,
    /// Set once the Interest has been sent upstream by this node.
    pub forwarded: bool,
    /// Set when the Interest came from a network face and was relayed.
    pub relayed: bool,
}

#[derive(Debug, Default)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
}

impl Pit {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &Name, now: f64) -> Option<&PitEntry> {
        self.entries.get(name).filter(|e| e.expiry > now)
    }

    pub fn get_mut(&mut self, name: &Name, now: f64) -> Option<&mut PitEntry> {
        self.entries.get_mut(name).filter(|e| e.expiry > now)
    }

    pub fn insert(&mut self, name: Name, face: FaceId, expiry: f64) -> &mut PitEntry {
        let entry = self.entries.entry(name).or_insert_with(|| PitEntry {
            in_faces: BTreeSet::new(),
            expiry,
            forwarded: false,
            relayed: false,
        });
        entry.in_faces.insert(face);
        entry.expiry = expiry;
        entry
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    /// Removes and returns every unexpired entry whose name is a prefix of `data_name`.
    pub fn take_matches(&mut self, data_name: &Name, now: f64) -> Vec<(Name, PitEntry)> {
        let mut out = Vec::new();
        for len in (0..=data_name.len()).rev() {
            let prefix = data_name.prefix(len);
            if let Some(e) = self.entries.remove(&prefix) {
                if e.expiry > now {
                    out.push((prefix, e));
                }
            }
        }
        out
    }

    /// Drops expired entries, returning them.
    pub fn purge(&mut self, now: f64) -> Vec<(Name, PitEntry)> {
        let expired: Vec<Name> = self
            .entries
            .iter()
            .filter(|(_, e)| e.expiry <= now)
            .map(|(n, _)| n.clone())
            .collect();
        expired
            .into_iter()
            .filter_map(|n| self.entries.remove(&n).map(|e| (n, e)))
            .collect()
    }
}
