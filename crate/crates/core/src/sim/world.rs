use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::hash::BuildHasherDefault;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collection::{build_collection, build_metadata, FileSpec, HmacSigner, TrustAnchors};
use crate::forwarder::{Action, Forwarder, PureForwarderPolicy, APP_FACE, RADIO_FACE};
use crate::name::Name;
use crate::packet::{Data, Packet};
use crate::peer::{category, AppOut, AppPolicy, AppTimer, DownloadSession, PeerApp, Role};

use super::metrics::{MetricsReport, NodeMetrics, NodeRole, TxCounts};
use super::mobility::{MobilityState, Mover, Position};
use super::scenario::{ConfigError, MediumParams, ScenarioConfig};
use super::trace::TraceSink;

type DetHashMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    /// Generated by the node's own application.
    App,
    /// Answer from the content store or the application's store.
    Answer,
    /// Relayed Interest or Data.
    Relay,
}

impl Origin {
    fn as_str(self) -> &'static str {
        match self {
            Origin::App => "app",
            Origin::Answer => "answer",
            Origin::Relay => "relay",
        }
    }
}

struct Outgoing {
    packet: Packet,
    scheduled: f64,
    origin: Origin,
}

/// One simulated device: forwarder, optional application, radio queue.
pub struct Node {
    pub index: usize,
    pub peer_id: u64,
    pub role: NodeRole,
    pub fwd: Forwarder,
    pub app: Option<PeerApp>,
    pure: PureForwarderPolicy,
    rng: ChaCha8Rng,
    pub tx: TxCounts,
    pub collisions: u64,
    outbox: BTreeMap<u64, Outgoing>,
    next_out: u64,
    pending_fwd: BTreeMap<(Name, u32), u64>,
    heard_data: DetHashMap<Name, f64>,
    busy_until: f64,
}

enum Ev {
    TxStart { node: usize, out: u64 },
    TxEnd { tx: u64 },
    Timer { node: usize, timer: AppTimer },
    Mobility,
}

struct QItem {
    t: f64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for QItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for QItem {}

impl PartialOrd for QItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for QItem {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

struct Tx {
    id: u64,
    sender: usize,
    end: f64,
    packet: Rc<Packet>,
    /// Receivers in range at start, with a corruption flag.
    receivers: Vec<(usize, bool)>,
    audible: Vec<bool>,
    sender_collided: bool,
}

/// Deterministic discrete-event world: nodes, radio medium and mobility,
/// fully determined by a scenario and a seed.
pub struct World {
    pub now: f64,
    seq: u64,
    queue: BinaryHeap<QItem>,
    pub nodes: Vec<Node>,
    pub mobility: MobilityState,
    medium: MediumParams,
    mobility_rng: ChaCha8Rng,
    medium_rng: ChaCha8Rng,
    active: Vec<Tx>,
    next_tx: u64,
    pub trace: TraceSink,
    max_time: f64,
    remaining: usize,
    seed: u64,
    collisions: u64,
    losses: u64,
    deliveries: u64,
    broadcasts: u64,
    events: u64,
    last_event_time: f64,
}

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s);
    r
}

/// Deterministic file contents for generated collections.
pub fn synthetic_file(file: usize, len: usize) -> Vec<u8> {
    (0..len)
        .map(|i| (i.wrapping_mul(131) ^ file.wrapping_mul(17) ^ (i >> 8)) as u8)
        .collect()
}

fn repo_positions(n: usize, w: f64, h: f64) -> Vec<Position> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    (0..n)
        .map(|i| Position {
            x: w * ((i % cols) as f64 + 0.5) / cols as f64,
            y: h * ((i / cols) as f64 + 0.5) / rows as f64,
        })
        .collect()
}

impl World {
    pub fn new(cfg: &ScenarioConfig, seed: u64, trace: TraceSink) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let spec = &cfg.collection;
        let cname = Name::parse(&spec.name).map_err(|e| ConfigError::Invalid {
            key: "collection.name".into(),
            reason: e.to_string(),
        })?;
        let producer = HmacSigner::new("producer", b"collection-producer-key".to_vec());
        let files = (0..spec.files)
            .map(|f| FileSpec::new(format!("file{f}"), synthetic_file(f, spec.file_size)))
            .collect();
        let col = build_collection(cname.clone(), files, spec.packet_size, &producer).map_err(|e| {
            ConfigError::Invalid {
                key: "collection".into(),
                reason: e.to_string(),
            }
        })?;
        let (md, segments) = build_metadata(&col, spec.metadata_format, spec.digest, &producer);
        let packets: Vec<Data> = col.iter_packets().cloned().collect();
        let anchors = TrustAnchors::default().with("producer", producer.verify_key());
        let max_wire = packets.iter().map(|d| Packet::Data(d.clone()).wire_len()).max().unwrap_or(0);
        let slot = max_wire as f64 * 8.0 / cfg.medium.data_rate;

        let mut mobility_rng = stream(seed, 0);
        let medium_rng = stream(seed, 1);
        let n = &cfg.nodes;
        let mut roles = Vec::new();
        roles.extend(std::iter::repeat_n(NodeRole::Repo, n.repos));
        roles.extend(std::iter::repeat_n(NodeRole::Downloader, n.downloaders));
        roles.extend(std::iter::repeat_n(NodeRole::PureForwarder, n.pure_forwarders));
        roles.extend(std::iter::repeat_n(NodeRole::Intermediate, n.intermediates));

        let mp = cfg.mobility;
        let fixed = repo_positions(n.repos, mp.arena_width, mp.arena_height);
        let mut movers = Vec::with_capacity(roles.len());
        let mut nodes = Vec::with_capacity(roles.len());
        for (i, role) in roles.iter().enumerate() {
            let mover = if *role == NodeRole::Repo {
                Mover {
                    pos: fixed[i],
                    speed: 0.0,
                    heading: 0.0,
                    mobile: false,
                }
            } else {
                MobilityState::random_mover(&mp, &mut mobility_rng)
            };
            movers.push(mover);
            let peer_id = i as u64 + 1;
            let app = match role {
                NodeRole::PureForwarder => None,
                NodeRole::Repo => Some((Role::Repo, Some(DownloadSession::seeded(md.clone(), segments.clone(), packets.clone())))),
                NodeRole::Downloader => Some((
                    Role::Downloader,
                    Some(DownloadSession::new(cname.clone(), cfg.peer.history_capacity)),
                )),
                NodeRole::Intermediate => Some((Role::Intermediate, None)),
            }
            .map(|(r, s)| {
                PeerApp::new(peer_id, r, cfg.peer.clone(), cfg.forwarder.pit_lifetime, slot, anchors.clone(), s)
            });
            nodes.push(Node {
                index: i,
                peer_id,
                role: *role,
                fwd: Forwarder::new(cfg.forwarder),
                app,
                pure: PureForwarderPolicy {
                    p_fwd: cfg.peer.forward_prob_no_knowledge,
                },
                rng: stream(seed, 2 + i as u64),
                tx: TxCounts::default(),
                collisions: 0,
                outbox: BTreeMap::new(),
                next_out: 0,
                pending_fwd: BTreeMap::new(),
                heard_data: DetHashMap::default(),
                busy_until: 0.0,
            });
        }
        Ok(Self {
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            remaining: n.downloaders,
            nodes,
            mobility: MobilityState::new(mp, movers),
            medium: cfg.medium,
            mobility_rng,
            medium_rng,
            active: Vec::new(),
            next_tx: 0,
            trace,
            max_time: cfg.run.max_sim_time,
            seed,
            collisions: 0,
            losses: 0,
            deliveries: 0,
            broadcasts: 0,
            events: 0,
            last_event_time: 0.0,
        })
    }

    fn push(&mut self, t: f64, ev: Ev) {
        debug_assert!(t + EPS >= self.now, "event scheduled in the past");
        self.seq += 1;
        self.queue.push(QItem {
            t: t.max(self.now),
            seq: self.seq,
            ev,
        });
    }

    /// Runs until every downloader finished or the time limit.
    pub fn run(&mut self) {
        self.start();
        self.process(self.max_time, true);
        let end = if self.remaining == 0 { self.last_event_time } else { self.max_time };
        self.now = end;
        for n in &mut self.nodes {
            n.fwd.settle(end);
        }
    }

    /// Starts every application and the mobility clock. [`World::run`]
    /// does this itself.
    pub fn start(&mut self) {
        for i in 0..self.nodes.len() {
            let node = &mut self.nodes[i];
            if let Some(app) = &mut node.app {
                app.start(0.0, &mut node.rng);
                let outs = app.drain();
                self.apply_app(i, outs);
            }
        }
        let tick = self.mobility.params.tick;
        self.push(tick, Ev::Mobility);
    }

    fn process(&mut self, until: f64, stop_when_done: bool) {
        let tick = self.mobility.params.tick;
        while let Some(item) = self.queue.peek() {
            if item.t > until || (stop_when_done && self.remaining == 0) {
                break;
            }
            let item = self.queue.pop().unwrap();
            debug_assert!(item.t + EPS >= self.now, "time went backwards");
            self.now = item.t;
            self.last_event_time = item.t;
            self.events += 1;
            match item.ev {
                Ev::TxStart { node, out } => self.tx_start(node, out),
                Ev::TxEnd { tx } => self.tx_end(tx),
                Ev::Timer { node, timer } => {
                    let n = &mut self.nodes[node];
                    if let Some(app) = &mut n.app {
                        app.on_timer(timer, self.now, &mut n.rng);
                        let outs = app.drain();
                        self.apply_app(node, outs);
                    }
                }
                Ev::Mobility => {
                    self.mobility.step(tick, &mut self.mobility_rng);
                    self.push(self.now + tick, Ev::Mobility);
                }
            }
        }
    }

    /// Queues a raw packet on a node's radio, bypassing its forwarder.
    pub fn inject(&mut self, node: usize, packet: Packet, delay: f64) {
        self.enqueue(node, packet, delay, Origin::App);
    }

    /// Processes events up to `t` without starting applications or
    /// stopping at completion.
    pub fn step_until(&mut self, t: f64) {
        self.process(t, false);
        self.now = self.now.max(t);
    }

    fn enqueue(&mut self, i: usize, packet: Packet, delay: f64, origin: Origin) -> u64 {
        let now = self.now;
        let node = &mut self.nodes[i];
        node.next_out += 1;
        let id = node.next_out;
        node.outbox.insert(
            id,
            Outgoing {
                packet,
                scheduled: now,
                origin,
            },
        );
        self.push(now + delay.max(0.0), Ev::TxStart { node: i, out: id });
        id
    }

    fn apply_app(&mut self, i: usize, outs: Vec<AppOut>) {
        for o in outs {
            match o {
                AppOut::Express { interest, delay } => {
                    let now = self.now;
                    let actions = self.nodes[i].fwd.express(interest, now);
                    for a in actions {
                        match a {
                            Action::SendInterest { interest, .. } => {
                                self.enqueue(i, Packet::Interest(interest), delay, Origin::App);
                            }
                            Action::SendData { face, data, .. } if face == APP_FACE => {
                                let node = &mut self.nodes[i];
                                let own = node.peer_id;
                                if let Some(app) = &mut node.app {
                                    app.on_data(&data, own, now, &mut node.rng);
                                    let more = app.drain();
                                    self.apply_app(i, more);
                                }
                            }
                            Action::SendData { .. } => {}
                        }
                    }
                }
                AppOut::Send { data, delay } => {
                    self.enqueue(i, Packet::Data(data), delay, Origin::App);
                }
                AppOut::Timer { at, timer } => self.push(at, Ev::Timer { node: i, timer }),
                AppOut::Event { kind, name, detail } => {
                    if kind == "complete" && self.nodes[i].role == NodeRole::Downloader {
                        self.remaining = self.remaining.saturating_sub(1);
                    }
                    self.trace.record(self.now, i, kind, &name, &detail);
                }
            }
        }
    }

    fn tx_start(&mut self, i: usize, out: u64) {
        let now = self.now;
        let node = &mut self.nodes[i];
        if !node.outbox.contains_key(&out) {
            return;
        }
        if node.busy_until > now + EPS {
            let at = node.busy_until;
            self.push(at, Ev::TxStart { node: i, out });
            return;
        }
        let o = node.outbox.remove(&out).unwrap();
        match &o.packet {
            Packet::Interest(int) => {
                if o.origin == Origin::Relay {
                    node.pending_fwd.remove(&(int.name.clone(), int.nonce));
                    if !node.fwd.awaiting(&int.name, now) {
                        return;
                    }
                }
            }
            Packet::Data(d) => {
                if o.origin != Origin::App
                    && node.heard_data.get(&d.name).is_some_and(|t| *t > o.scheduled)
                {
                    self.trace.record(now, i, "cancel", &d.name, o.origin.as_str());
                    return;
                }
                node.heard_data.insert(d.name.clone(), now);
            }
        }
        self.transmit(i, o.packet, o.origin);
    }

    fn transmit(&mut self, i: usize, packet: Packet, origin: Origin) {
        let now = self.now;
        let airtime = packet.wire_len() as f64 * 8.0 / self.medium.data_rate;
        let end = now + airtime;
        let pos = self.mobility.position(i);
        let n = self.nodes.len();
        let mut audible = vec![false; n];
        let mut receivers = Vec::new();
        for k in 0..n {
            if k != i && self.mobility.position(k).dist(pos) <= self.medium.range {
                audible[k] = true;
                receivers.push((k, false));
            }
        }
        let mut tx = Tx {
            id: self.next_tx,
            sender: i,
            end,
            packet: Rc::new(packet),
            receivers,
            audible,
            sender_collided: false,
        };
        self.next_tx += 1;
        for a in self.active.iter_mut() {
            if a.end <= now + EPS {
                continue;
            }
            for (r, bad) in tx.receivers.iter_mut() {
                if *r == a.sender || a.audible[*r] {
                    *bad = true;
                }
            }
            for (r, bad) in a.receivers.iter_mut() {
                if *r == i || tx.audible[*r] {
                    *bad = true;
                }
            }
            if a.audible[i] {
                tx.sender_collided = true;
            }
            if tx.audible[a.sender] {
                a.sender_collided = true;
            }
        }
        let name = tx.packet.name().clone();
        let cat = category(&name);
        let node = &mut self.nodes[i];
        node.tx.add(cat, origin == Origin::Relay);
        node.busy_until = end;
        self.broadcasts += 1;
        if self.trace.enabled() {
            let kind = match &*tx.packet {
                Packet::Interest(_) => "I",
                Packet::Data(_) => "D",
            };
            let detail = format!("{kind}/{}/{}/{}", cat.as_str(), origin.as_str(), tx.packet.wire_len());
            self.trace.record(now, i, "tx", &name, &detail);
        }
        let id = tx.id;
        self.active.push(tx);
        self.push(end, Ev::TxEnd { tx: id });
    }

    fn tx_end(&mut self, id: u64) {
        let Some(pos) = self.active.iter().position(|t| t.id == id) else {
            return;
        };
        let tx = self.active.swap_remove(pos);
        let now = self.now;
        let loss = self.medium.loss_rate;
        for &(r, bad) in &tx.receivers {
            if bad {
                self.collisions += 1;
                self.nodes[r].collisions += 1;
                self.trace.record(now, r, "collide", tx.packet.name(), &format!("from={}", tx.sender));
                continue;
            }
            if self.medium_rng.gen_bool(loss) {
                self.losses += 1;
                self.trace.record(now, r, "loss", tx.packet.name(), &format!("from={}", tx.sender));
                continue;
            }
            self.deliveries += 1;
            self.receive(r, tx.sender, &tx.packet);
        }
        if tx.sender_collided {
            if let Packet::Data(d) = &*tx.packet {
                let s = tx.sender;
                let node = &mut self.nodes[s];
                if let Some(app) = &mut node.app {
                    app.on_collision(d, now, &mut node.rng);
                    let outs = app.drain();
                    self.apply_app(s, outs);
                }
            }
        }
    }

    fn cancel_relay(&mut self, i: usize, key: &(Name, u32)) {
        let now = self.now;
        let node = &mut self.nodes[i];
        if let Some(out) = node.pending_fwd.remove(key) {
            node.outbox.remove(&out);
            node.fwd.cancel_forward(&key.0, now);
            self.trace.record(now, i, "cancel", &key.0, "relay");
        }
    }

    fn receive(&mut self, i: usize, from: usize, packet: &Packet) {
        let now = self.now;
        let link_src = self.nodes[from].peer_id;
        if self.trace.enabled() {
            self.trace.record(now, i, "rx", packet.name(), &format!("from={from}"));
        }
        match packet {
            Packet::Interest(int) => {
                let key = (int.name.clone(), int.nonce);
                if self.nodes[i].pending_fwd.contains_key(&key) {
                    self.cancel_relay(i, &key);
                }
                let node = &mut self.nodes[i];
                let (actions, outs) = match &mut node.app {
                    Some(app) => {
                        app.observe_interest(int, link_src, now);
                        let mut pol = AppPolicy { app, link_src };
                        let a = node.fwd.on_interest(int, RADIO_FACE, now, &mut pol, &mut node.rng);
                        (a, app.drain())
                    }
                    None => (
                        node.fwd.on_interest(int, RADIO_FACE, now, &mut node.pure, &mut node.rng),
                        Vec::new(),
                    ),
                };
                self.apply_app(i, outs);
                for a in actions {
                    match a {
                        Action::SendInterest { interest, delay, .. } => {
                            let key = (interest.name.clone(), interest.nonce);
                            let out = self.enqueue(i, Packet::Interest(interest), delay, Origin::Relay);
                            self.nodes[i].pending_fwd.insert(key, out);
                        }
                        Action::SendData { face, data, delay } if face == RADIO_FACE => {
                            self.enqueue(i, Packet::Data(data), delay, Origin::Answer);
                        }
                        Action::SendData { .. } => {}
                    }
                }
            }
            Packet::Data(d) => {
                self.nodes[i].heard_data.insert(d.name.clone(), now);
                let stale: Vec<(Name, u32)> = self.nodes[i]
                    .pending_fwd
                    .keys()
                    .filter(|(n, _)| n.is_prefix_of(&d.name))
                    .cloned()
                    .collect();
                for key in stale {
                    self.cancel_relay(i, &key);
                }
                let node = &mut self.nodes[i];
                let actions = node.fwd.on_data(d, RADIO_FACE, now, &mut node.rng);
                for a in actions {
                    if let Action::SendData { face, data, delay } = a {
                        if face == RADIO_FACE {
                            self.enqueue(i, Packet::Data(data), delay, Origin::Relay);
                        }
                    }
                }
                let node = &mut self.nodes[i];
                if let Some(app) = &mut node.app {
                    app.on_data(d, link_src, now, &mut node.rng);
                    let outs = app.drain();
                    self.apply_app(i, outs);
                }
            }
        }
    }

    pub fn report(&mut self) -> MetricsReport {
        let mut tx = TxCounts::default();
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let (mut ok, mut failed) = (0, 0);
        for n in &self.nodes {
            tx.merge(&n.tx);
            let s = &n.fwd.suppression;
            ok += s.forwards_succeeded();
            failed += s.forwards_failed();
            let download_time = match n.role {
                NodeRole::Downloader => n.app.as_ref().and_then(PeerApp::completed_at),
                _ => None,
            };
            nodes.push(NodeMetrics {
                node: n.index,
                peer_id: n.peer_id,
                role: n.role,
                download_time,
                tx: n.tx,
                collisions: n.collisions,
                forwards_succeeded: s.forwards_succeeded(),
                forwards_failed: s.forwards_failed(),
                signature_failures: n.app.as_ref().map_or(0, |a| a.stats.signature_failures),
            });
        }
        MetricsReport {
            seed: self.seed,
            nodes,
            tx,
            collisions: self.collisions,
            losses: self.losses,
            deliveries: self.deliveries,
            broadcasts: self.broadcasts,
            forwards_succeeded: ok,
            forwards_failed: failed,
            end_time: self.now,
            max_sim_time: self.max_time,
            timed_out: self.remaining > 0,
            events: self.events,
            trace_digest: self.trace.finish(),
        }
    }
}

/// Builds and runs one world without a trace.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<MetricsReport, ConfigError> {
    run_scenario_traced(cfg, seed, TraceSink::Off).map(|(r, _)| r)
}

/// Builds and runs one world, returning the trace sink with the report.
pub fn run_scenario_traced(
    cfg: &ScenarioConfig,
    seed: u64,
    trace: TraceSink,
) -> Result<(MetricsReport, TraceSink), ConfigError> {
    let mut w = World::new(cfg, seed, trace)?;
    w.run();
    let r = w.report();
    Ok((r, w.trace))
}
