use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::advertisement::Bitmap;
use crate::collection::{sign_data, HmacSigner, TrustAnchors};
use crate::forwarder::{pure_forward_decide, Decision, InterestPolicy, PolicyContext, Produce};
use crate::name::Name;
use crate::packet::{Data, Interest};
use crate::scheduling::{peba_assign_slot, PebaState, PrioritizationState};

use super::config::{BitmapCount, ExchangeMode, PeerConfig};
use super::knowledge::NeighborKnowledge;
use super::messages::{
    bitmap_request_name, bitmap_response_name, classify, decode_bitmap_response, discovery_data_name,
    discovery_prefix, encode_bitmap_response, metadata_name, BitmapRequest, DiscoveryEntry,
    DiscoveryPayload, Message,
};
use super::session::{Accept, DownloadSession, MetadataOutcome};

/// Relayed neighbor entries carried in one discovery reply.
const MAX_RELAYED_ENTRIES: usize = 16;
/// Bitmap response rounds older than this are dropped.
const ROUND_LIFETIME: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Starts with the whole collection.
    Repo,
    Downloader,
    /// Protocol-aware relay without a collection of its own.
    Intermediate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppTimer {
    Discovery,
    Poll,
    BitmapResponse { key: Name, token: u64 },
    ExchangeQuiet { token: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppOut {
    /// Interest from the application, handed to the forwarder after `delay`.
    Express { interest: Interest, delay: f64 },
    /// Data originated by the application, broadcast after `delay`.
    Send { data: Data, delay: f64 },
    Timer { at: f64, timer: AppTimer },
    /// Notable state change for the trace.
    Event { kind: &'static str, name: Name, detail: String },
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AppStats {
    pub bitmap_requests: u64,
    pub bitmap_responses: u64,
    pub bitmap_collisions: u64,
    pub discovery_replies: u64,
    /// Metadata that failed authentication or did not decode.
    pub signature_failures: u64,
    pub rejected_packets: u64,
    pub data_interests: u64,
    pub knowledge_forwards: u64,
    pub knowledge_suppressions: u64,
    /// Stored packets this node had asked for, and ones it only overheard.
    pub stored_requested: u64,
    pub stored_overheard: u64,
}

/// Responder state for one bitmap request.
#[derive(Debug, Clone)]
struct Round {
    requester: u64,
    wanted: u16,
    heard: u32,
    prio: PrioritizationState,
    peba: PebaState,
    attempts: u32,
    token: u64,
    sent: bool,
    backoff: bool,
    done: bool,
    created: f64,
}

/// Requester state for the bitmap exchange of the current encounter.
#[derive(Debug, Clone, Default)]
struct Exchange {
    seq: u32,
    active: Option<ActiveRequest>,
    heard_encounter: u32,
    due: bool,
    last_start: Option<f64>,
    token: u64,
}

#[derive(Debug, Clone)]
struct ActiveRequest {
    key: Name,
    wanted: u32,
    heard: u32,
    last_activity: f64,
    blocking: bool,
}

/// The per-node application: discovery, metadata and data fetching, the
/// bitmap exchange in both roles and the knowledge-based relay policy.
pub struct PeerApp {
    pub peer_id: u64,
    pub role: Role,
    pub cfg: PeerConfig,
    pub pit_lifetime: f64,
    /// Airtime of a full-size packet; one backoff slot.
    pub slot_duration: f64,
    signer: HmacSigner,
    anchors: TrustAnchors,
    pub session: Option<DownloadSession>,
    pub knowledge: NeighborKnowledge,
    pub stats: AppStats,
    period: f64,
    last_beacon: f64,
    last_neighbor: f64,
    last_reply: f64,
    exchange: Exchange,
    rounds: BTreeMap<Name, Round>,
    responded_to: BTreeMap<u64, f64>,
    next_token: u64,
    polling: bool,
    out: Vec<AppOut>,
}

impl PeerApp {
    pub fn new(
        peer_id: u64,
        role: Role,
        cfg: PeerConfig,
        pit_lifetime: f64,
        slot_duration: f64,
        anchors: TrustAnchors,
        session: Option<DownloadSession>,
    ) -> Self {
        let signer = HmacSigner::new(format!("peer-{peer_id}"), peer_id.to_be_bytes().to_vec());
        Self {
            peer_id,
            role,
            knowledge: NeighborKnowledge::new(cfg.knowledge_ttl),
            period: cfg.discovery_period_min,
            slot_duration: cfg.slot_duration.unwrap_or(slot_duration),
            cfg,
            pit_lifetime,
            signer,
            anchors,
            session,
            stats: AppStats::default(),
            last_beacon: f64::NEG_INFINITY,
            last_neighbor: f64::NEG_INFINITY,
            last_reply: f64::NEG_INFINITY,
            exchange: Exchange::default(),
            rounds: BTreeMap::new(),
            responded_to: BTreeMap::new(),
            next_token: 0,
            polling: false,
            out: Vec::new(),
        }
    }

    pub fn discovery_period(&self) -> f64 {
        self.period
    }

    pub fn is_complete(&self) -> bool {
        self.session.as_ref().is_some_and(DownloadSession::is_complete)
    }

    pub fn completed_at(&self) -> Option<f64> {
        self.session.as_ref().and_then(|s| s.completed_at)
    }

    /// Output produced so far; the caller drains it after every entry point.
    pub fn drain(&mut self) -> Vec<AppOut> {
        std::mem::take(&mut self.out)
    }

    fn token(&mut self) -> u64 {
        self.next_token += 1;
        self.next_token
    }

    fn window_jitter(&self, rng: &mut dyn RngCore) -> f64 {
        rng.gen_range(0.0..self.cfg.window)
    }

    fn timer(&mut self, at: f64, timer: AppTimer) {
        self.out.push(AppOut::Timer { at, timer });
    }

    fn event(&mut self, kind: &'static str, name: Name, detail: String) {
        self.out.push(AppOut::Event { kind, name, detail });
    }

    pub fn start(&mut self, now: f64, rng: &mut dyn RngCore) {
        let first = now + rng.gen_range(0.0..self.cfg.discovery_period_min);
        self.timer(first, AppTimer::Discovery);
        if self.role == Role::Downloader {
            self.polling = true;
            self.timer(now + self.cfg.poll_interval, AppTimer::Poll);
        }
    }

    pub fn on_timer(&mut self, timer: AppTimer, now: f64, rng: &mut dyn RngCore) {
        match timer {
            AppTimer::Discovery => self.on_discovery_timer(now, rng),
            AppTimer::Poll => {
                self.pump(now, rng);
                if self.is_complete() {
                    self.polling = false;
                } else {
                    self.timer(now + self.cfg.poll_interval, AppTimer::Poll);
                }
            }
            AppTimer::BitmapResponse { key, token } => self.fire_bitmap(&key, token, now),
            AppTimer::ExchangeQuiet { token } => {
                if token != self.exchange.token {
                    return;
                }
                let quiet = self.cfg.quiet();
                if let Some(a) = &self.exchange.active {
                    let due = a.last_activity + quiet;
                    if now + 1e-12 >= due {
                        self.exchange.active = None;
                        self.pump(now, rng);
                    } else {
                        self.timer(due, AppTimer::ExchangeQuiet { token });
                    }
                }
            }
        }
    }

    fn on_discovery_timer(&mut self, now: f64, rng: &mut dyn RngCore) {
        self.knowledge.expire(now);
        self.rounds.retain(|_, r| now - r.created < ROUND_LIFETIME);
        let ttl = self.cfg.bitmap_refresh;
        self.responded_to.retain(|_, t| now - *t < ttl);
        let heard_recently = self.last_neighbor > self.last_beacon.max(now - self.period);
        self.period = if heard_recently {
            self.cfg.discovery_period_min
        } else {
            (self.period * 2.0).min(self.cfg.discovery_period_max)
        };
        self.last_beacon = now;
        let interest = Interest::new(discovery_prefix(), rng.gen());
        let delay = self.window_jitter(rng);
        self.out.push(AppOut::Express { interest, delay });
        self.timer(now + self.period, AppTimer::Discovery);
    }

    /// Bookkeeping for any Interest received on the radio.
    pub fn observe_interest(&mut self, interest: &Interest, link_src: u64, now: f64) {
        self.note_neighbor(link_src, now);
        match classify(&interest.name) {
            Message::BitmapRequest { collection, peer, .. } if peer != self.peer_id => {
                if let Ok(req) = BitmapRequest::decode(collection.clone(), &interest.app_params) {
                    self.learn_bitmap(peer, req.bitmap, now);
                }
            }
            Message::Packet { collection, .. } => {
                if let Some(g) = self.global_index(&collection, &interest.name) {
                    // a relay holding the packet would have answered instead
                    self.knowledge.infer_lacks(link_src, &collection, g);
                    if let Some(s) = &mut self.session {
                        s.note_overheard(g, now);
                    }
                }
            }
            _ => {}
        }
    }

    fn note_neighbor(&mut self, peer: u64, now: f64) {
        self.last_neighbor = now;
        self.knowledge.heard(peer, now, true);
    }

    fn global_index(&self, collection: &Name, name: &Name) -> Option<usize> {
        let s = self.session.as_ref().filter(|s| &s.collection == collection)?;
        s.metadata.as_ref()?.global_index(name).ok()
    }

    fn learn_bitmap(&mut self, peer: u64, bitmap: Bitmap, now: f64) {
        if let Some(s) = &mut self.session {
            if s.collection == *bitmap.collection() && s.has_metadata() && bitmap.len() == s.total() {
                s.history.record(peer, bitmap.clone(), now);
                s.mark_rarity_dirty();
            }
        }
        self.knowledge.set_bitmap(peer, bitmap, now);
    }

    /// Answers an Interest from local state before the PIT sees it.
    pub fn produce(&mut self, interest: &Interest, link_src: u64, now: f64, rng: &mut dyn RngCore) -> Produce {
        match classify(&interest.name) {
            Message::Discovery { responder: None } => {
                if now - self.last_reply < 0.5 * self.cfg.discovery_period_min {
                    return Produce::Consumed;
                }
                self.last_reply = now;
                self.stats.discovery_replies += 1;
                let data = self.discovery_data(now);
                Produce::Answer {
                    data,
                    delay: self.window_jitter(rng),
                }
            }
            Message::Discovery { .. } => Produce::Consumed,
            Message::Metadata { collection, seq } => {
                match self
                    .session
                    .as_ref()
                    .filter(|s| s.collection == collection)
                    .and_then(|s| s.segment(seq))
                {
                    Some(d) => Produce::Answer {
                        data: d.clone(),
                        delay: self.window_jitter(rng),
                    },
                    None => Produce::Pass,
                }
            }
            Message::BitmapRequest { collection, peer, .. } => {
                if peer != self.peer_id {
                    self.on_bitmap_request(interest, &collection, peer, link_src, now, rng);
                }
                Produce::Consumed
            }
            Message::BitmapResponse { .. } => Produce::Consumed,
            Message::Packet { collection, .. } => {
                let held = self.global_index(&collection, &interest.name).and_then(|g| {
                    let s = self.session.as_ref()?;
                    s.packet(g).cloned()
                });
                match held {
                    Some(data) => Produce::Answer {
                        data,
                        delay: self.window_jitter(rng),
                    },
                    None => Produce::Pass,
                }
            }
            Message::Other => Produce::Pass,
        }
    }

    fn discovery_data(&mut self, now: f64) -> Data {
        let mut entries = Vec::new();
        if let Some(s) = &self.session {
            entries.push(DiscoveryEntry {
                collection: s.collection.clone(),
                holder: self.peer_id,
                segments: s.segment_count(),
                have: s.own.have_count() as u32,
                total: s.total() as u32,
            });
        }
        let relayed = if self.cfg.multi_hop() { self.knowledge_peers(now) } else { Vec::new() };
        'peers: for (peer, n) in relayed {
            for (c, v) in &n {
                if entries.len() > MAX_RELAYED_ENTRIES {
                    break 'peers;
                }
                entries.push(DiscoveryEntry {
                    collection: c.clone(),
                    holder: peer,
                    segments: v.0,
                    have: v.1,
                    total: v.2,
                });
            }
        }
        let payload = DiscoveryPayload {
            peer: self.peer_id,
            entries,
        };
        let mut d = Data::new(discovery_data_name(self.peer_id), payload.encode());
        sign_data(&mut d, &self.signer);
        d
    }

    /// First-hand views of direct neighbors holding data: (segments, have, total).
    fn knowledge_peers(&self, now: f64) -> Vec<(u64, Vec<(Name, (u32, u32, u32))>)> {
        let ttl = self.knowledge.ttl;
        let mut out = Vec::new();
        for peer in self.knowledge.peer_ids() {
            let Some(n) = self.knowledge.get(peer) else { continue };
            if now - n.last_heard > ttl {
                continue;
            }
            let cols: Vec<_> = n
                .collections
                .iter()
                .filter(|(_, v)| v.hops == 1 && v.have > 0 && now - v.updated <= ttl)
                .map(|(c, v)| (c.clone(), (v.segments, v.have as u32, v.total as u32)))
                .collect();
            if !cols.is_empty() {
                out.push((peer, cols));
            }
        }
        out
    }

    fn on_bitmap_request(
        &mut self,
        interest: &Interest,
        collection: &Name,
        requester: u64,
        _link_src: u64,
        now: f64,
        rng: &mut dyn RngCore,
    ) {
        let Some(s) = self.session.as_ref().filter(|s| &s.collection == collection && s.has_metadata()) else {
            return;
        };
        let Ok(req) = BitmapRequest::decode(collection.clone(), &interest.app_params) else {
            return;
        };
        if req.bitmap.len() != s.total() || self.rounds.contains_key(&interest.name) {
            return;
        }
        let recent = self
            .responded_to
            .get(&requester)
            .is_some_and(|t| now - t < self.cfg.bitmap_refresh);
        if recent && !req.fresh_encounter {
            return;
        }
        let prio = PrioritizationState::with_requester(self.cfg.window, &req.bitmap);
        let Some(delay) = prio.timer(&s.own) else { return };
        let token = self.token();
        self.rounds.insert(
            interest.name.clone(),
            Round {
                requester,
                wanted: req.wanted,
                heard: 0,
                prio,
                peba: PebaState::new(self.cfg.peba_groups, self.slot_duration),
                attempts: 0,
                token,
                sent: false,
                backoff: false,
                done: false,
                created: now,
            },
        );
        let at = now + delay + self.bitmap_jitter(rng);
        self.timer(
            at,
            AppTimer::BitmapResponse {
                key: interest.name.clone(),
                token,
            },
        );
    }

    fn bitmap_jitter(&self, rng: &mut dyn RngCore) -> f64 {
        if self.cfg.bitmap_jitter > 0.0 {
            rng.gen_range(0.0..self.cfg.bitmap_jitter)
        } else {
            0.0
        }
    }

    fn fire_bitmap(&mut self, key: &Name, token: u64, now: f64) {
        let Some(r) = self.rounds.get_mut(key) else { return };
        if r.token != token || r.done || r.sent {
            return;
        }
        let Some(s) = &self.session else { return };
        r.sent = true;
        r.backoff = false;
        let requester = r.requester;
        let mut d = Data::new(
            bitmap_response_name(key, self.peer_id),
            encode_bitmap_response(self.peer_id, &s.own),
        );
        sign_data(&mut d, &self.signer);
        self.responded_to.insert(requester, now);
        self.stats.bitmap_responses += 1;
        self.out.push(AppOut::Send { data: d, delay: 0.0 });
    }

    /// The radio reported that an own transmission overlapped another one.
    pub fn on_collision(&mut self, data: &Data, now: f64, rng: &mut dyn RngCore) {
        let Message::BitmapResponse { .. } = classify(&data.name) else {
            return;
        };
        let key = data.name.prefix(data.name.len() - 1);
        let max_attempts = self.cfg.max_bitmap_attempts;
        let peba = self.cfg.peba;
        let jitter = self.bitmap_jitter(rng);
        let token = self.token();
        let Some(s) = &self.session else { return };
        let Some(r) = self.rounds.get_mut(&key) else { return };
        self.stats.bitmap_collisions += 1;
        // a collided bitmap did not answer the requester
        self.responded_to.remove(&r.requester);
        r.attempts += 1;
        if r.done || r.attempts >= max_attempts {
            r.done = true;
            return;
        }
        let contribution = r.prio.contribution(&s.own);
        if contribution == 0 {
            r.done = true;
            return;
        }
        let delay = if peba {
            r.peba.on_collision();
            match peba_assign_slot(&r.peba, contribution, r.prio.missing(), rng) {
                Ok(slot) => slot as f64 * r.peba.slot_duration,
                Err(_) => 0.0,
            }
        } else {
            r.prio.timer(&s.own).unwrap_or(self.cfg.window)
        };
        r.sent = false;
        r.backoff = true;
        r.token = token;
        self.timer(
            now + delay + jitter,
            AppTimer::BitmapResponse { key, token },
        );
    }

    /// Every Data heard on the radio, addressed to this node or not.
    pub fn on_data(&mut self, data: &Data, link_src: u64, now: f64, rng: &mut dyn RngCore) {
        if link_src != self.peer_id {
            self.note_neighbor(link_src, now);
        }
        match classify(&data.name) {
            Message::Discovery { responder: Some(_) } => self.on_discovery_data(data, link_src, now, rng),
            Message::Metadata { collection, seq } => {
                let anchors = &self.anchors;
                let Some(s) = self
                    .session
                    .as_mut()
                    .filter(|s| s.collection == collection && !s.has_metadata())
                else {
                    return;
                };
                match s.accept_segment(seq, data, anchors) {
                    MetadataOutcome::Ready => {
                        let detail = format!("packets={}", s.total());
                        self.event("metadata", collection, detail);
                        self.pump(now, rng);
                    }
                    MetadataOutcome::BadSignature => {
                        self.stats.signature_failures += 1;
                        self.event("sig-fail", collection, String::new());
                    }
                    MetadataOutcome::Malformed => {
                        self.stats.signature_failures += 1;
                        self.event("md-malformed", collection, String::new());
                    }
                    MetadataOutcome::Incomplete => self.pump(now, rng),
                }
            }
            Message::BitmapResponse { collection, peer, .. } => {
                let Ok((responder, bitmap)) = decode_bitmap_response(collection.clone(), &data.content) else {
                    return;
                };
                let key = data.name.prefix(data.name.len() - 1);
                self.on_bitmap_heard(&key, peer, responder, &bitmap, now, rng);
                if responder != self.peer_id {
                    self.learn_bitmap(responder, bitmap, now);
                }
                if peer == self.peer_id {
                    self.pump(now, rng);
                }
            }
            Message::Packet { collection, .. } => {
                let own = self.session.as_ref().is_some_and(|s| s.collection == collection && s.has_metadata());
                if !own {
                    self.knowledge.mark_seen(data.name.clone(), now);
                    return;
                }
                let s = self.session.as_mut().unwrap();
                let g = s.metadata.as_ref().unwrap().global_index(&data.name).ok();
                let was_complete = s.is_complete();
                let requested = g.is_some_and(|g| s.in_flight.contains_key(&g));
                let res = s.accept_packet(data, now);
                if let Some(g) = g {
                    self.knowledge.infer_has(link_src, &collection, g, now);
                }
                match res {
                    Accept::Stored(n) => {
                        if requested {
                            self.stats.stored_requested += n as u64;
                        } else {
                            self.stats.stored_overheard += n as u64;
                        }
                        if !was_complete && self.is_complete() {
                            self.event("complete", collection, format!("t={now:.6}"));
                        }
                        self.pump(now, rng);
                    }
                    Accept::Rejected => {
                        self.stats.rejected_packets += 1;
                        self.event("reject", data.name.clone(), String::new());
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }

    fn on_discovery_data(&mut self, data: &Data, link_src: u64, now: f64, rng: &mut dyn RngCore) {
        let Ok(p) = DiscoveryPayload::decode(&data.content) else {
            return;
        };
        if p.peer == self.peer_id {
            return;
        }
        if p.peer != link_src {
            self.knowledge.heard(p.peer, now, false);
        }
        let mut new_holder = false;
        for e in p.entries {
            if e.holder == self.peer_id {
                continue;
            }
            let hops = if e.holder == p.peer && link_src == p.peer { 1 } else { 2 };
            if e.holder != link_src {
                self.knowledge.heard(e.holder, now, false);
            }
            let ours = self.session.as_ref().is_some_and(|s| s.collection == e.collection);
            let ttl = self.knowledge.ttl;
            let known = self
                .knowledge
                .get(e.holder)
                .and_then(|n| n.collections.get(&e.collection))
                .is_some_and(|v| v.have > 0 && now - v.updated <= ttl);
            self.knowledge.set_summary(
                e.holder,
                &e.collection,
                e.have as usize,
                e.total as usize,
                e.segments,
                hops,
                now,
            );
            if ours && e.have > 0 {
                let s = self.session.as_mut().unwrap();
                s.expect_segments(e.segments);
                s.mark_rarity_dirty();
                if !known {
                    new_holder = true;
                }
            }
        }
        if new_holder {
            if let Some(s) = &mut self.session {
                s.new_encounter();
            }
            self.exchange.due = true;
            self.pump(now, rng);
        }
    }

    fn on_bitmap_heard(
        &mut self,
        key: &Name,
        requester: u64,
        responder: u64,
        bitmap: &Bitmap,
        now: f64,
        rng: &mut dyn RngCore,
    ) {
        if requester == self.peer_id {
            if let Some(a) = &mut self.exchange.active {
                if &a.key == key {
                    a.heard += 1;
                    a.last_activity = now;
                    self.exchange.heard_encounter += 1;
                    if a.heard >= a.wanted {
                        self.exchange.active = None;
                    }
                }
            }
            return;
        }
        if responder == self.peer_id {
            return;
        }
        let jitter = self.bitmap_jitter(rng);
        let token = self.token();
        let Some(s) = &self.session else { return };
        let Some(r) = self.rounds.get_mut(key) else { return };
        if r.done || bitmap.len() != s.total() {
            return;
        }
        r.heard += 1;
        r.prio.on_heard(bitmap);
        if r.wanted != u16::MAX && r.heard >= r.wanted as u32 {
            r.done = true;
            return;
        }
        if r.sent {
            return;
        }
        if r.backoff {
            if r.prio.contribution(&s.own) == 0 {
                r.done = true;
            }
            return;
        }
        match r.prio.timer(&s.own) {
            None => r.done = true,
            Some(t) => {
                r.token = token;
                let key = key.clone();
                self.timer(now + t + jitter, AppTimer::BitmapResponse { key, token });
            }
        }
    }

    /// Direct neighbors known to hold data of the session's collection.
    fn holders_in_range(&self, now: f64) -> u32 {
        let Some(s) = &self.session else { return 0 };
        self.knowledge
            .views(&s.collection, now, None)
            .filter(|(_, v)| v.hops == 1 && v.have > 0)
            .count() as u32
    }

    fn bitmap_target(&self, now: f64) -> u32 {
        match self.cfg.b {
            BitmapCount::All => self.holders_in_range(now),
            BitmapCount::Count(n) => n as u32,
        }
    }

    fn send_bitmap_request(&mut self, fresh: bool, wanted: u32, blocking: bool, now: f64, rng: &mut dyn RngCore) {
        let Some(s) = &self.session else { return };
        self.exchange.seq += 1;
        let name = bitmap_request_name(&s.collection, self.peer_id, self.exchange.seq);
        let wire = if wanted >= u16::MAX as u32 { u16::MAX } else { wanted as u16 };
        let req = BitmapRequest {
            bitmap: s.own.clone(),
            wanted: wire,
            fresh_encounter: fresh,
        };
        let interest = Interest::with_params(name.clone(), rng.gen(), req.encode());
        self.stats.bitmap_requests += 1;
        self.exchange.token += 1;
        let token = self.exchange.token;
        self.exchange.active = Some(ActiveRequest {
            key: name,
            wanted,
            heard: 0,
            last_activity: now,
            blocking,
        });
        self.out.push(AppOut::Express { interest, delay: 0.0 });
        self.timer(now + self.cfg.quiet(), AppTimer::ExchangeQuiet { token });
    }

    /// Issues whatever requests the download can make right now.
    pub fn pump(&mut self, now: f64, rng: &mut dyn RngCore) {
        let Some(s) = &mut self.session else { return };
        if s.is_complete() || self.role != Role::Downloader {
            return;
        }
        s.expire_in_flight(now, self.pit_lifetime, self.cfg.max_attempts);
        let c = s.collection.clone();
        if !s.has_metadata() {
            if !self.knowledge.advertises(&c, now, None) {
                return;
            }
            let want: Vec<u32> = s
                .missing_segments()
                .filter(|q| !s.md_in_flight.contains_key(q))
                .take(self.cfg.pipeline_depth.saturating_sub(s.md_in_flight.len()))
                .collect();
            for q in want {
                s.md_in_flight.insert(q, super::session::InFlight { sent: now, attempts: 1 });
                let interest = Interest::new(metadata_name(&c, q), rng.gen());
                let delay = rng.gen_range(0.0..self.cfg.window);
                self.out.push(AppOut::Express { interest, delay });
            }
            return;
        }

        let holders = self.holders_in_range(now);
        if let Some(a) = &self.exchange.active {
            if now >= a.last_activity + self.cfg.quiet() {
                self.exchange.active = None;
            }
        }
        let refresh_due = self
            .exchange
            .last_start
            .is_none_or(|t| now - t >= self.cfg.bitmap_refresh);
        let b_target = self.bitmap_target(now);
        if self.exchange.active.is_none() && holders > 0 && (self.exchange.due || refresh_due) {
            self.exchange.due = false;
            self.exchange.last_start = Some(now);
            self.exchange.heard_encounter = 0;
            match self.cfg.exchange_mode {
                ExchangeMode::BitmapsFirst if b_target > 0 => {
                    let wanted = match self.cfg.b {
                        BitmapCount::All => u16::MAX as u32,
                        BitmapCount::Count(n) => n as u32,
                    };
                    self.send_bitmap_request(true, wanted, true, now, rng);
                }
                ExchangeMode::Interleaved if b_target > 0 => self.send_bitmap_request(true, 1, false, now, rng),
                _ => {}
            }
        }
        if let Some(a) = &mut self.exchange.active {
            if a.blocking {
                // all-bitmaps mode ends once every holder in range answered
                if matches!(self.cfg.b, BitmapCount::All) && a.heard >= holders.max(1) {
                    self.exchange.active = None;
                } else {
                    return;
                }
            }
        }

        loop {
            let s = self.session.as_ref().unwrap();
            if s.in_flight.len() >= self.cfg.pipeline_depth {
                break;
            }
            if self.cfg.exchange_mode == ExchangeMode::Interleaved
                && self.exchange.active.is_none()
                && self.exchange.heard_encounter >= 1
                && self.exchange.heard_encounter < b_target
                && rng.gen_bool(0.5)
            {
                self.send_bitmap_request(false, 1, false, now, rng);
                continue;
            }
            let s = self.session.as_mut().unwrap();
            let Some(g) = s.next_packet(&self.knowledge, self.cfg.strategy, self.cfg.random_start, now, rng) else {
                break;
            };
            s.note_sent(g, now);
            let name = s.metadata.as_ref().unwrap().packet_name(g).expect("index in range");
            self.stats.data_interests += 1;
            let interest = Interest::new(name, rng.gen());
            let delay = rng.gen_range(0.0..self.cfg.window);
            self.out.push(AppOut::Express { interest, delay });
        }
    }

    /// Forward or suppress an Interest the node cannot answer itself.
    pub fn decide(
        &mut self,
        ctx: &PolicyContext<'_>,
        interest: &Interest,
        link_src: u64,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Decision {
        let knowledge_forward = |rng: &mut dyn RngCore, window: f64| Decision::Forward {
            // one window of grace lets a holder in the requester's own
            // range answer first, which cancels this relay
            delay: window + if ctx.config.fwd_jitter_max > 0.0 {
                rng.gen_range(0.0..ctx.config.fwd_jitter_max)
            } else {
                0.0
            },
        };
        if !self.cfg.multi_hop() {
            return Decision::Suppress;
        }
        let verdict = match classify(&interest.name) {
            Message::Discovery { .. } | Message::BitmapRequest { .. } | Message::BitmapResponse { .. } => {
                Some(false)
            }
            Message::Metadata { collection, .. } => {
                if self.knows(&collection, now, link_src) {
                    Some(self.knowledge.advertises(&collection, now, Some(link_src)))
                } else {
                    None
                }
            }
            Message::Packet { collection, .. } => {
                if let Some(g) = self.global_index(&collection, &interest.name) {
                    Some(self.knowledge.holder_of(&collection, g, now, Some(link_src)))
                } else if self.knowledge.take_seen(&interest.name, now) {
                    Some(true)
                } else if self.knows(&collection, now, link_src) {
                    Some(
                        self.knowledge
                            .views(&collection, now, Some(link_src))
                            .any(|(_, v)| v.is_complete()),
                    )
                } else {
                    None
                }
            }
            Message::Other => None,
        };
        match verdict {
            Some(true) => {
                self.stats.knowledge_forwards += 1;
                knowledge_forward(rng, self.cfg.window)
            }
            Some(false) => {
                self.stats.knowledge_suppressions += 1;
                Decision::Suppress
            }
            None => pure_forward_decide(
                ctx.suppression,
                &interest.name,
                now,
                self.cfg.forward_prob_no_knowledge,
                ctx.config.fwd_jitter_max,
                rng,
            ),
        }
    }

    fn knows(&self, c: &Name, now: f64, exclude: u64) -> bool {
        self.knowledge.views(c, now, Some(exclude)).next().is_some()
    }
}

/// Plugs a [`PeerApp`] into the forwarding pipeline for one Interest.
pub struct AppPolicy<'a> {
    pub app: &'a mut PeerApp,
    pub link_src: u64,
}

impl InterestPolicy for AppPolicy<'_> {
    fn produce(&mut self, interest: &Interest, now: f64, rng: &mut dyn RngCore) -> Produce {
        self.app.produce(interest, self.link_src, now, rng)
    }

    fn decide(
        &mut self,
        ctx: &PolicyContext<'_>,
        interest: &Interest,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Decision {
        self.app.decide(ctx, interest, self.link_src, now, rng)
    }
}
