use std::collections::BTreeMap;

use crate::advertisement::Bitmap;
use crate::name::Name;

/// What a neighbor is known to hold of one collection.
#[derive(Debug, Clone)]
pub struct CollectionView {
    pub have: usize,
    pub total: usize,
    pub segments: u32,
    pub bitmap: Option<Bitmap>,
    pub updated: f64,
    /// 1 when learned from the peer itself, 2 when relayed by a neighbor.
    pub hops: u8,
}

impl CollectionView {
    pub fn is_complete(&self) -> bool {
        self.total > 0 && self.have >= self.total
    }

    /// `Some(true/false)` when the holding of packet `g` is known.
    pub fn holds(&self, g: usize) -> Option<bool> {
        if self.is_complete() {
            return Some(true);
        }
        match &self.bitmap {
            Some(b) if g < b.len() => Some(b.get(g)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Neighbor {
    pub last_heard: f64,
    pub encounter_start: f64,
    /// Heard directly at least once in the current encounter.
    pub direct: bool,
    pub collections: BTreeMap<Name, CollectionView>,
}

/// Short-lived record of nearby peers, their collections and bitmaps, plus
/// names of foreign data recently seen on air.
#[derive(Debug, Clone)]
pub struct NeighborKnowledge {
    pub ttl: f64,
    peers: BTreeMap<u64, Neighbor>,
    seen: BTreeMap<Name, f64>,
}

impl NeighborKnowledge {
    pub fn new(ttl: f64) -> Self {
        Self {
            ttl,
            peers: BTreeMap::new(),
            seen: BTreeMap::new(),
        }
    }

    pub fn is_fresh(&self, at: f64, now: f64) -> bool {
        now - at <= self.ttl
    }

    /// Records traffic from `peer`; returns true when this starts a new
    /// encounter (peer unknown or silent for longer than the TTL).
    pub fn heard(&mut self, peer: u64, now: f64, direct: bool) -> bool {
        let ttl = self.ttl;
        match self.peers.get_mut(&peer) {
            Some(n) if now - n.last_heard <= ttl => {
                n.last_heard = now;
                n.direct |= direct;
                false
            }
            Some(n) => {
                n.last_heard = now;
                n.encounter_start = now;
                n.direct = direct;
                n.collections.clear();
                true
            }
            None => {
                self.peers.insert(
                    peer,
                    Neighbor {
                        last_heard: now,
                        encounter_start: now,
                        direct,
                        collections: BTreeMap::new(),
                    },
                );
                true
            }
        }
    }

    pub fn peer_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.peers.keys().copied()
    }

    pub fn get(&self, peer: u64) -> Option<&Neighbor> {
        self.peers.get(&peer)
    }

    fn view_mut(&mut self, peer: u64, c: &Name, now: f64) -> &mut CollectionView {
        let n = self.peers.entry(peer).or_insert_with(|| Neighbor {
            last_heard: now,
            encounter_start: now,
            direct: false,
            collections: BTreeMap::new(),
        });
        n.collections
            .entry(c.clone())
            .or_insert_with(|| CollectionView {
                have: 0,
                total: 0,
                segments: 0,
                bitmap: None,
                updated: now,
                hops: 2,
            })
    }

    /// Records a discovery summary. A relayed (2-hop) summary never
    /// overrides a fresh first-hand one.
    #[allow(clippy::too_many_arguments)]
    pub fn set_summary(
        &mut self,
        peer: u64,
        c: &Name,
        have: usize,
        total: usize,
        segments: u32,
        hops: u8,
        now: f64,
    ) {
        let ttl = self.ttl;
        let fresh_direct = self
            .peers
            .get(&peer)
            .and_then(|n| n.collections.get(c))
            .is_some_and(|v| v.hops == 1 && now - v.updated <= ttl);
        if hops > 1 && fresh_direct {
            return;
        }
        let v = self.view_mut(peer, c, now);
        v.hops = hops;
        v.have = have;
        v.total = total;
        v.segments = segments;
        v.updated = now;
        if let Some(b) = &v.bitmap {
            if b.len() != total || b.have_count() > have {
                v.bitmap = None;
            }
        }
    }

    pub fn set_bitmap(&mut self, peer: u64, bitmap: Bitmap, now: f64) {
        let c = bitmap.collection().clone();
        let v = self.view_mut(peer, &c, now);
        v.hops = 1;
        v.have = bitmap.have_count();
        v.total = bitmap.len();
        v.bitmap = Some(bitmap);
        v.updated = now;
    }

    /// `peer` transmitted packet `g` of `c`, so it holds it.
    pub fn infer_has(&mut self, peer: u64, c: &Name, g: usize, now: f64) {
        if let Some(v) = self.peers.get_mut(&peer).and_then(|n| n.collections.get_mut(c)) {
            if let Some(b) = &mut v.bitmap {
                if g < b.len() && b.set(g) {
                    v.have = b.have_count();
                }
            }
            v.updated = now;
        }
    }

    /// `peer` asked for packet `g` of `c`, so it lacks it.
    pub fn infer_lacks(&mut self, peer: u64, c: &Name, g: usize) {
        if let Some(v) = self.peers.get_mut(&peer).and_then(|n| n.collections.get_mut(c)) {
            if let Some(b) = &mut v.bitmap {
                if g < b.len() && b.clear(g) {
                    v.have = b.have_count();
                }
            }
        }
    }

    /// Fresh views of `c`, excluding `exclude`.
    pub fn views<'a>(
        &'a self,
        c: &'a Name,
        now: f64,
        exclude: Option<u64>,
    ) -> impl Iterator<Item = (u64, &'a CollectionView)> + 'a {
        let ttl = self.ttl;
        self.peers
            .iter()
            .filter(move |(p, n)| Some(**p) != exclude && now - n.last_heard <= ttl)
            .filter_map(move |(p, n)| {
                n.collections
                    .get(c)
                    .filter(|v| now - v.updated <= ttl)
                    .map(|v| (*p, v))
            })
    }

    /// True when a fresh neighbor other than `exclude` is known to hold `g`.
    pub fn holder_of(&self, c: &Name, g: usize, now: f64, exclude: Option<u64>) -> bool {
        self.views(c, now, exclude).any(|(_, v)| v.holds(g) == Some(true))
    }

    /// True when any fresh neighbor other than `exclude` has data of `c`.
    pub fn advertises(&self, c: &Name, now: f64, exclude: Option<u64>) -> bool {
        self.views(c, now, exclude).any(|(_, v)| v.have > 0)
    }

    pub fn knows_collection(&self, c: &Name, now: f64) -> bool {
        self.views(c, now, None).next().is_some()
    }

    pub fn fresh_peer_count(&self, now: f64) -> usize {
        self.peers
            .values()
            .filter(|n| now - n.last_heard <= self.ttl)
            .count()
    }

    pub fn mark_seen(&mut self, name: Name, now: f64) {
        self.seen.insert(name, now + self.ttl);
    }

    /// Consumes a recently-seen entry for `name`.
    pub fn take_seen(&mut self, name: &Name, now: f64) -> bool {
        match self.seen.remove(name) {
            Some(exp) => exp > now,
            None => false,
        }
    }

    pub fn expire(&mut self, now: f64) {
        let ttl = self.ttl;
        self.peers.retain(|_, n| now - n.last_heard <= 4.0 * ttl);
        self.seen.retain(|_, e| *e > now);
    }
}
