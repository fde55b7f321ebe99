use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;

use crate::advertisement::{
    next_request_where, rarity_encounter, rarity_local, Bitmap, EncounterHistory, RarityVector,
    RpfStrategy,
};
use crate::collection::{
    reassemble_metadata, verify_packet, CollectionMetadata, TrustAnchors, Verdict, VerifyContext,
};
use crate::name::Name;
use crate::packet::Data;

use super::knowledge::NeighborKnowledge;

/// Minimum spacing between rarity recomputations driven by overheard data.
const RARITY_REFRESH: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight {
    pub sent: f64,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accept {
    /// Packets newly verified and stored.
    Stored(usize),
    Deferred,
    Duplicate,
    Rejected,
    Foreign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetadataOutcome {
    Incomplete,
    Ready,
    BadSignature,
    Malformed,
}

/// One collection being fetched or served. A repository holds a session
/// that starts complete.
#[derive(Debug, Clone)]
pub struct DownloadSession {
    pub collection: Name,
    pub metadata: Option<CollectionMetadata>,
    segments: Vec<Option<Data>>,
    pub md_in_flight: BTreeMap<u32, InFlight>,
    pub own: Bitmap,
    packets: Vec<Option<Data>>,
    verify: VerifyContext,
    deferred: BTreeMap<usize, Data>,
    pub rarity: RarityVector,
    rarity_dirty: bool,
    rarity_at: f64,
    pub in_flight: BTreeMap<usize, InFlight>,
    /// Packets a neighbor asked for recently; the answer will be overheard.
    overheard: BTreeMap<usize, f64>,
    /// Attempts per packet since the last new encounter.
    attempts: BTreeMap<usize, u32>,
    blocked: BTreeSet<usize>,
    pub history: EncounterHistory,
    pub completed_at: Option<f64>,
    pub rejected_packets: u64,
    pub signature_failures: u64,
}

impl DownloadSession {
    pub fn new(collection: Name, history_capacity: usize) -> Self {
        Self {
            own: Bitmap::new(collection.clone(), 0),
            collection,
            metadata: None,
            segments: Vec::new(),
            md_in_flight: BTreeMap::new(),
            packets: Vec::new(),
            verify: VerifyContext::default(),
            deferred: BTreeMap::new(),
            rarity: RarityVector::default(),
            rarity_dirty: true,
            rarity_at: f64::NEG_INFINITY,
            in_flight: BTreeMap::new(),
            overheard: BTreeMap::new(),
            attempts: BTreeMap::new(),
            blocked: BTreeSet::new(),
            history: EncounterHistory::new(history_capacity),
            completed_at: None,
            rejected_packets: 0,
            signature_failures: 0,
        }
    }

    /// A session holding every packet from the start.
    pub fn seeded(md: CollectionMetadata, segments: Vec<Data>, packets: Vec<Data>) -> Self {
        let mut s = Self::new(md.collection.clone(), 1);
        assert_eq!(packets.len(), md.total_packets(), "packet count mismatch");
        s.own = Bitmap::full(md.collection.clone(), packets.len());
        s.packets = packets.into_iter().map(Some).collect();
        s.segments = segments.into_iter().map(Some).collect();
        s.metadata = Some(md);
        s.completed_at = Some(0.0);
        s
    }

    pub fn has_metadata(&self) -> bool {
        self.metadata.is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.metadata.is_some() && self.own.is_complete()
    }

    pub fn total(&self) -> usize {
        self.own.len()
    }

    pub fn segment_count(&self) -> u32 {
        self.segments.len() as u32
    }

    pub fn segment(&self, seq: u64) -> Option<&Data> {
        self.segments.get(usize::try_from(seq).ok()?)?.as_ref()
    }

    pub fn packet(&self, g: usize) -> Option<&Data> {
        self.packets.get(g)?.as_ref()
    }

    /// Learns how many metadata segments to fetch. Ignored once known.
    pub fn expect_segments(&mut self, n: u32) {
        if self.metadata.is_none() && self.segments.is_empty() && n > 0 {
            self.segments = vec![None; n as usize];
        }
    }

    pub fn missing_segments(&self) -> impl Iterator<Item = u32> + '_ {
        self.segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_none())
            .map(|(i, _)| i as u32)
    }

    pub fn accept_segment(&mut self, seq: u64, data: &Data, anchors: &TrustAnchors) -> MetadataOutcome {
        if self.metadata.is_some() {
            return MetadataOutcome::Ready;
        }
        let Some(slot) = usize::try_from(seq).ok().and_then(|i| self.segments.get_mut(i)) else {
            return MetadataOutcome::Incomplete;
        };
        if slot.is_none() {
            *slot = Some(data.clone());
        }
        self.md_in_flight.remove(&(seq as u32));
        if self.segments.iter().any(Option::is_none) {
            return MetadataOutcome::Incomplete;
        }
        let segs: Vec<Data> = self.segments.iter().flatten().cloned().collect();
        let md = match reassemble_metadata(&segs) {
            Ok(md) if md.collection == self.collection => md,
            _ => {
                self.segments.iter_mut().for_each(|s| *s = None);
                return MetadataOutcome::Malformed;
            }
        };
        if !matches!(md.verify_signature(anchors), Ok(true)) {
            self.signature_failures += 1;
            self.segments.iter_mut().for_each(|s| *s = None);
            return MetadataOutcome::BadSignature;
        }
        let total = md.total_packets();
        self.own = Bitmap::new(self.collection.clone(), total);
        self.packets = vec![None; total];
        self.metadata = Some(md);
        self.rarity_dirty = true;
        MetadataOutcome::Ready
    }

    /// Verifies and stores a collection packet.
    pub fn accept_packet(&mut self, data: &Data, now: f64) -> Accept {
        let Some(md) = &self.metadata else {
            return Accept::Foreign;
        };
        let Ok(g) = md.global_index(&data.name) else {
            return Accept::Foreign;
        };
        if self.own.get(g) || self.deferred.contains_key(&g) {
            return Accept::Duplicate;
        }
        self.in_flight.remove(&g);
        self.overheard.remove(&g);
        match verify_packet(md, data, &mut self.verify) {
            Ok(Verdict::Accepted(indices)) => {
                let mut n = 0;
                for i in indices {
                    let d = if i == g { Some(data.clone()) } else { self.deferred.remove(&i) };
                    if let Some(d) = d {
                        self.packets[i] = Some(d);
                        if self.own.set(i) {
                            n += 1;
                        }
                    }
                }
                self.rarity_dirty = true;
                if self.own.is_complete() && self.completed_at.is_none() {
                    self.completed_at = Some(now);
                }
                Accept::Stored(n)
            }
            Ok(Verdict::Deferred) => {
                self.deferred.insert(g, data.clone());
                Accept::Deferred
            }
            Ok(Verdict::Rejected { indices, .. }) => {
                for i in indices {
                    self.deferred.remove(&i);
                }
                self.rejected_packets += 1;
                Accept::Rejected
            }
            Err(_) => Accept::Foreign,
        }
    }

    pub fn mark_rarity_dirty(&mut self) {
        self.rarity_dirty = true;
    }

    /// A new encounter gives blocked packets another chance.
    pub fn new_encounter(&mut self) {
        self.attempts.clear();
        self.blocked.clear();
    }

    /// A neighbor requested `g`; skip it until the in-flight timeout.
    pub fn note_overheard(&mut self, g: usize, now: f64) {
        if g < self.own.len() && !self.own.get(g) && !self.in_flight.contains_key(&g) {
            self.overheard.insert(g, now);
        }
    }

    pub fn note_sent(&mut self, g: usize, now: f64) {
        debug_assert!(!self.own.get(g), "requested a packet already held");
        let a = self.attempts.entry(g).or_insert(0);
        *a += 1;
        self.in_flight.insert(g, InFlight { sent: now, attempts: *a });
    }

    /// Drops in-flight requests older than `timeout`; packets that used up
    /// their attempts stay blocked until the next encounter.
    pub fn expire_in_flight(&mut self, now: f64, timeout: f64, max_attempts: u32) -> usize {
        let stale: Vec<usize> = self
            .in_flight
            .iter()
            .filter(|(_, f)| now - f.sent >= timeout)
            .map(|(g, _)| *g)
            .collect();
        for g in &stale {
            let f = self.in_flight.remove(g).unwrap();
            if f.attempts >= max_attempts {
                self.blocked.insert(*g);
            }
        }
        self.md_in_flight.retain(|_, f| now - f.sent < timeout);
        self.overheard.retain(|_, t| now - *t < timeout);
        stale.len()
    }

    fn refresh_rarity(&mut self, knowledge: &NeighborKnowledge, strategy: RpfStrategy, now: f64) {
        let stale = self.rarity.len() != self.own.len();
        if !stale && !(self.rarity_dirty && now - self.rarity_at >= RARITY_REFRESH) {
            return;
        }
        let len = self.own.len();
        let r = match strategy {
            RpfStrategy::Local => {
                let neigh: Vec<Bitmap> = knowledge
                    .views(&self.collection, now, None)
                    .filter_map(|(_, v)| {
                        if v.is_complete() && v.total == len {
                            Some(Bitmap::full(self.collection.clone(), len))
                        } else {
                            v.bitmap.clone().filter(|b| b.len() == len)
                        }
                    })
                    .collect();
                rarity_local(&self.own, neigh.iter())
            }
            RpfStrategy::Encounter => rarity_encounter(&self.own, &self.history),
        };
        self.rarity = r.unwrap_or_else(|_| RarityVector {
            scores: vec![0; len],
            surveyed: 0,
        });
        self.rarity_dirty = false;
        self.rarity_at = now;
    }

    /// Packets some fresh neighbor is known to hold, and whether a neighbor
    /// with unknown holdings has data of this collection.
    pub fn availability(&self, knowledge: &NeighborKnowledge, now: f64) -> (Bitmap, bool) {
        let len = self.own.len();
        let mut avail = Bitmap::new(self.collection.clone(), len);
        let mut unknown = false;
        for (_, v) in knowledge.views(&self.collection, now, None) {
            if v.is_complete() && v.total == len {
                return (Bitmap::full(self.collection.clone(), len), false);
            }
            match &v.bitmap {
                Some(b) if b.len() == len => avail.union_with(b),
                _ => unknown |= v.have > 0,
            }
        }
        (avail, unknown)
    }

    /// Rarest missing packet that a neighbor can supply and that is not in
    /// flight or blocked. Falls back to any missing packet when only
    /// neighbors of unknown holdings advertise the collection.
    pub fn next_packet(
        &mut self,
        knowledge: &NeighborKnowledge,
        strategy: RpfStrategy,
        random_start: bool,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Option<usize> {
        if !self.has_metadata() || self.own.is_complete() {
            return None;
        }
        self.refresh_rarity(knowledge, strategy, now);
        let (avail, unknown) = self.availability(knowledge, now);
        let free = |g: usize| {
            !self.in_flight.contains_key(&g)
                && !self.overheard.contains_key(&g)
                && !self.blocked.contains(&g)
                && !self.deferred.contains_key(&g)
        };
        let pick = next_request_where(&self.own, &self.rarity, |g| avail.get(g) && free(g), rng, random_start);
        if pick.is_some() || !unknown {
            return pick;
        }
        next_request_where(&self.own, &self.rarity, free, rng, random_start)
    }
}
