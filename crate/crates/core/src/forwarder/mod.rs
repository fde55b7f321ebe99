//! Per-node forwarding engine: content store, pending Interest table,
//! forwarding table and the suppression state of probabilistic forwarders.
//!
//! Every node owns one broadcast radio face ([`RADIO_FACE`]) and one local
//! application face ([`APP_FACE`]). The FIB holds a single wildcard entry
//! toward the radio.

mod cs;
mod fib;
mod pit;
mod suppression;

use std::collections::{BTreeSet, HashMap};
use std::hash::BuildHasherDefault;
use std::collections::hash_map::DefaultHasher;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::name::Name;
use crate::packet::{Data, Interest};

pub use cs::ContentStore;
pub use fib::Fib;
pub use pit::{Pit, PitEntry};
pub use suppression::{pure_forward_decide, PureForwarderPolicy, SuppressionTable};

pub type FaceId = u32;
pub const APP_FACE: FaceId = 0;
pub const RADIO_FACE: FaceId = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwarderConfig {
    pub pit_lifetime: f64,
    pub suppress_duration: f64,
    pub fwd_jitter_max: f64,
    pub cs_capacity: usize,
}

impl ForwarderConfig {
    pub fn default_forward_prob() -> f64 {
        0.2
    }
}

impl Default for ForwarderConfig {
    fn default() -> Self {
        Self {
            pit_lifetime: 2.0,
            suppress_duration: 5.0,
            fwd_jitter_max: 0.020,
            cs_capacity: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SendInterest { face: FaceId, interest: Interest, delay: f64 },
    SendData { face: FaceId, data: Data, delay: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Forward { delay: f64 },
    Suppress,
}

/// Outcome of offering a network Interest to the local application before
/// PIT processing.
#[derive(Debug, Clone, PartialEq)]
pub enum Produce {
    Pass,
    Answer { data: Data, delay: f64 },
    /// The application took the Interest and answers on its own schedule.
    Consumed,
}

pub struct PolicyContext<'a> {
    pub suppression: &'a SuppressionTable,
    pub config: &'a ForwarderConfig,
}

/// Role-specific behavior plugged into the forwarding pipeline.
pub trait InterestPolicy {
    fn produce(&mut self, _interest: &Interest, _now: f64, _rng: &mut dyn RngCore) -> Produce {
        Produce::Pass
    }

    fn decide(
        &mut self,
        ctx: &PolicyContext<'_>,
        interest: &Interest,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Decision;
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ForwarderCounters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub suppressions: u64,
    pub cache_hits: u64,
    pub aggregated: u64,
    pub duplicate_nonces: u64,
    pub unsolicited_data: u64,
    pub cancelled_forwards: u64,
}

type DetHashMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

pub struct Forwarder {
    pub config: ForwarderConfig,
    pub cs: ContentStore,
    pub pit: Pit,
    pub fib: Fib,
    pub suppression: SuppressionTable,
    pub counters: ForwarderCounters,
    nonces: DetHashMap<(Name, u32), f64>,
    nonce_purge_at: usize,
}

impl Forwarder {
    pub fn new(config: ForwarderConfig) -> Self {
        let mut fib = Fib::default();
        fib.add(Name::empty(), RADIO_FACE);
        Self {
            cs: ContentStore::new(config.cs_capacity),
            pit: Pit::default(),
            fib,
            suppression: SuppressionTable::default(),
            counters: ForwarderCounters::default(),
            nonces: DetHashMap::default(),
            nonce_purge_at: 1024,
            config,
        }
    }

    fn seen_nonce(&mut self, interest: &Interest, now: f64) -> bool {
        let key = (interest.name.clone(), interest.nonce);
        if let Some(exp) = self.nonces.get(&key) {
            if *exp > now {
                return true;
            }
        }
        self.nonces.insert(key, now + self.config.pit_lifetime);
        if self.nonces.len() >= self.nonce_purge_at {
            self.nonces.retain(|_, e| *e > now);
            self.nonce_purge_at = (self.nonces.len() * 2).max(1024);
        }
        false
    }

    /// Interest from the local application.
    pub fn express(&mut self, interest: Interest, now: f64) -> Vec<Action> {
        self.counters.interests_in += 1;
        self.seen_nonce(&interest, now);
        if let Some(d) = self.cs.lookup(&interest.name) {
            self.counters.cache_hits += 1;
            return vec![Action::SendData {
                face: APP_FACE,
                data: d.clone(),
                delay: 0.0,
            }];
        }
        let expiry = now + self.config.pit_lifetime;
        if let Some(e) = self.pit.get_mut(&interest.name, now) {
            e.in_faces.insert(APP_FACE);
            self.counters.aggregated += 1;
            return Vec::new();
        }
        let entry = self.pit.insert(interest.name.clone(), APP_FACE, expiry);
        entry.forwarded = true;
        let faces: Vec<FaceId> = self
            .fib
            .lookup(&interest.name)
            .map(|s| s.iter().copied().filter(|f| *f != APP_FACE).collect())
            .unwrap_or_default();
        self.counters.interests_out += faces.len() as u64;
        faces
            .into_iter()
            .map(|face| Action::SendInterest {
                face,
                interest: interest.clone(),
                delay: 0.0,
            })
            .collect()
    }

    /// Interest arriving on a network face.
    pub fn on_interest(
        &mut self,
        interest: &Interest,
        in_face: FaceId,
        now: f64,
        policy: &mut dyn InterestPolicy,
        rng: &mut dyn RngCore,
    ) -> Vec<Action> {
        self.counters.interests_in += 1;
        if self.seen_nonce(interest, now) {
            self.counters.duplicate_nonces += 1;
            return Vec::new();
        }
        if let Some(d) = self.cs.lookup(&interest.name) {
            self.counters.cache_hits += 1;
            let data = d.clone();
            let delay = self.jitter(rng);
            return vec![Action::SendData {
                face: in_face,
                data,
                delay,
            }];
        }
        match policy.produce(interest, now, rng) {
            Produce::Pass => {}
            Produce::Answer { data, delay } => {
                return vec![Action::SendData {
                    face: in_face,
                    data,
                    delay,
                }]
            }
            Produce::Consumed => return Vec::new(),
        }
        if let Some(e) = self.pit.get_mut(&interest.name, now) {
            self.counters.aggregated += 1;
            // A neighbor asking for what we already asked for will hear the
            // same broadcast answer; relaying it again would be redundant.
            if !(in_face == RADIO_FACE && e.in_faces.contains(&APP_FACE)) {
                e.in_faces.insert(in_face);
            }
            return Vec::new();
        }
        self.suppression
            .settle(now, self.config.suppress_duration);
        let decision = {
            let ctx = PolicyContext {
                suppression: &self.suppression,
                config: &self.config,
            };
            policy.decide(&ctx, interest, now, rng)
        };
        match decision {
            Decision::Suppress => {
                self.counters.suppressions += 1;
                Vec::new()
            }
            Decision::Forward { delay } => {
                let expiry = now + self.config.pit_lifetime;
                let e = self.pit.insert(interest.name.clone(), in_face, expiry);
                e.forwarded = true;
                e.relayed = true;
                self.suppression.note_forward(interest.name.clone(), expiry);
                self.counters.interests_out += 1;
                vec![Action::SendInterest {
                    face: RADIO_FACE,
                    interest: interest.clone(),
                    delay,
                }]
            }
        }
    }

    /// True while a relayed Interest still waits for Data; used to cancel
    /// a jittered forward once the answer has been overheard.
    pub fn awaiting(&self, name: &Name, now: f64) -> bool {
        self.pit.get(name, now).is_some()
    }

    /// Drops a relayed Interest that was overheard from another relay
    /// before its jitter elapsed. Returns false when there was nothing to
    /// cancel, e.g. the local application also asked for the name.
    pub fn cancel_forward(&mut self, name: &Name, now: f64) -> bool {
        match self.pit.get(name, now) {
            Some(e) if e.relayed && !e.in_faces.contains(&APP_FACE) => {}
            _ => return false,
        }
        self.pit.remove(name);
        self.suppression.cancel(name);
        self.counters.interests_out -= 1;
        self.counters.cancelled_forwards += 1;
        true
    }

    pub fn on_data(
        &mut self,
        data: &Data,
        in_face: FaceId,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Vec<Action> {
        self.counters.data_in += 1;
        let matches = self.pit.take_matches(&data.name, now);
        let mut faces = BTreeSet::new();
        for (name, entry) in &matches {
            if entry.relayed {
                self.suppression.note_satisfied(name);
            }
            for f in &entry.in_faces {
                // the radio is a broadcast medium; the arrival face is only
                // excluded for point-to-point faces
                if *f == in_face && *f != RADIO_FACE {
                    continue;
                }
                faces.insert(*f);
            }
        }
        if matches.is_empty() {
            self.counters.unsolicited_data += 1;
        }
        self.cs.insert(data.clone());
        let mut out = Vec::with_capacity(faces.len());
        for face in faces {
            let delay = if face == APP_FACE { 0.0 } else { self.jitter(rng) };
            if face != APP_FACE {
                self.counters.data_out += 1;
            }
            out.push(Action::SendData {
                face,
                data: data.clone(),
                delay,
            });
        }
        out
    }

    /// Counts forwards whose deadline passed without Data.
    pub fn settle(&mut self, now: f64) {
        self.suppression
            .settle(now, self.config.suppress_duration);
    }

    fn jitter(&self, rng: &mut dyn RngCore) -> f64 {
        if self.config.fwd_jitter_max > 0.0 {
            rng.gen_range(0.0..=self.config.fwd_jitter_max)
        } else {
            0.0
        }
    }
}
