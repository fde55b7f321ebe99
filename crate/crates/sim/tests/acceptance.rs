//! Acceptance criteria 1-15, one PASS/FAIL line each.
//!
//! Criteria 1-9 and 15 are exact and fail the target. The directional
//! desk-scale criteria 10-14 are statistical; a FAIL there is printed with
//! its numbers and only fails the target under `DAPES_ACCEPTANCE_STRICT=1`.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use dapes_core::advertisement::{Bitmap, RpfStrategy};
use dapes_core::analysis::rpf_effectiveness;
use dapes_core::collection::{
    build_collection, build_metadata, metadata_subnames_bytes, verify_packet, Collection, DigestAlgo,
    FileSpec, HmacSigner, MetadataFormat, Verdict, VerifyContext,
};
use dapes_core::forwarder::{Action, Forwarder, ForwarderConfig, PureForwarderPolicy, RADIO_FACE};
use dapes_core::peer::{BitmapCount, ExchangeMode};
use dapes_core::scheduling::{peba_assign_slot, peba_group, PebaState, PrioritizationState};
use dapes_core::sim::{median, MetricsReport, Mover, NodeCounts, Position, ScenarioConfig, TraceSink, World};
use dapes_core::{Data, Interest, Name, Packet};
use dapes_sim::{load_config, run_batch, write_run_csv, BatchOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

/// Range sweep for the desk-scale criteria.
const RANGES: [f64; 4] = [80.0, 100.0, 120.0, 140.0];
const ALPHA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn name(s: &str) -> Name {
    Name::parse(s).unwrap()
}

fn signer() -> HmacSigner {
    HmacSigner::new(b"/acceptance/key".to_vec(), b"secret".to_vec())
}

fn collection(files: &[(&str, usize)], packet_size: usize) -> Collection {
    let files = files
        .iter()
        .enumerate()
        .map(|(i, (n, len))| FileSpec::new(*n, (0..*len).map(|j| (j * 31 + i * 7) as u8).collect::<Vec<_>>()))
        .collect();
    build_collection(name("/acceptance/col"), files, packet_size, &signer()).unwrap()
}

fn c1() -> Outcome {
    let bytes = metadata_subnames_bytes(1000, 4, 20, 8);
    let col = collection(&[("f", 1000 * 1024)], 1024);
    let (_, segs) = build_metadata(&col, MetadataFormat::DigestList, DigestAlgo::Sha1, &signer());
    outcome(
        bytes == 32_000 && segs.len() >= 32,
        format!("subname bytes {bytes}, DigestList segments {}", segs.len()),
    )
}

fn c2() -> Outcome {
    let col = collection(&[("f", 1000 * 1024)], 1024);
    let (_, segs) = build_metadata(&col, MetadataFormat::MerkleRoots, DigestAlgo::Sha1, &signer());
    outcome(segs.len() == 1, format!("MerkleRoots segments {}", segs.len()))
}

fn c3() -> Outcome {
    let zero: f64 = rpf_effectiveness(5000, 0).unwrap();
    let one: f64 = rpf_effectiveness(5000, 1).unwrap();
    let mut monotone = true;
    for n in [2u64, 10, 100, 5000, 1_000_000] {
        let mut last = -1.0;
        for k in 0..=20 {
            let e: f64 = rpf_effectiveness(n, k).unwrap();
            monotone &= e >= last;
            last = e;
        }
    }
    outcome(
        zero == 0.0 && one >= 0.99 && monotone,
        format!("eta(5000,0)={zero}, eta(5000,1)={one:.6}, nondecreasing={monotone}"),
    )
}

/// Lone peer per group, uniform slot inside its group: mean delay from the
/// start of the round is `(j*n + (n-1)/2) * tau`, the `(W-1)/2 * tau` mean of
/// a uniform window of `W = n` slots shifted by the groups ahead of it.
fn c4() -> Outcome {
    let started = Instant::now();
    let tau = 0.001;
    let trials = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (l, k) in [(8u32, 2u32), (16, 2), (16, 4)] {
        let mut st = PebaState::new(k, tau);
        while st.slot_count() < l {
            st.on_collision();
        }
        let n = l / k;
        for j in 0..k {
            // contribution landing the peer in group j of k with 100 missing
            let contribution = (100 * (k - 1 - j) as usize).div_ceil(k as usize);
            assert_eq!(peba_group(contribution, 100, k), j);
            let mut sum = 0.0;
            for _ in 0..trials {
                let s = peba_assign_slot(&st, contribution, 100, &mut rng).unwrap();
                sum += s as f64 * tau;
            }
            let mean = sum / trials as f64;
            let expect = (j * n) as f64 * tau + (n as f64 - 1.0) / 2.0 * tau;
            let rel = (mean - expect).abs() / expect;
            worst = worst.max(rel);
            let _ = write!(detail, "L={l},k={k},j={j}:{:.4}ms ", mean * 1e3);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        worst < 0.05 && secs < 30.0,
        format!("{detail}worst rel err {worst:.4}, {secs:.1}s"),
    )
}

fn random_name(rng: &mut ChaCha8Rng) -> Name {
    let n = rng.gen_range(0..6);
    let comps: Vec<String> = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..12);
            (0..len).map(|_| rng.sample(rand::distributions::Alphanumeric) as char).collect()
        })
        .collect();
    Name::from_components(comps).unwrap()
}

fn random_packet(rng: &mut ChaCha8Rng, s: &HmacSigner) -> Packet {
    let name = random_name(rng);
    if rng.gen_bool(0.5) {
        let params: Vec<u8> = (0..rng.gen_range(0..40)).map(|_| rng.gen()).collect();
        Packet::Interest(Interest::with_params(name, rng.gen(), params))
    } else {
        let content: Vec<u8> = (0..rng.gen_range(0..1100)).map(|_| rng.gen()).collect();
        let mut d = Data::new(name, content);
        if rng.gen_bool(0.5) {
            dapes_core::collection::sign_data(&mut d, s);
        }
        Packet::Data(d)
    }
}

fn c5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = signer();
    let mut bad = 0;
    for _ in 0..10_000 {
        let p = random_packet(&mut rng, &s);
        let bytes = p.encode();
        if bytes.len() != p.wire_len() || Packet::decode(&bytes).ok().as_ref() != Some(&p) {
            bad += 1;
        }
    }
    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../testdata/wire_vectors.txt"))
        .unwrap_or_default();
    let mut vectors = 0;
    let mut stable = !golden.is_empty();
    for line in golden.lines() {
        let mut f = line.split('\t');
        let (label, value) = (f.next().unwrap_or(""), f.next().unwrap_or(""));
        if let Some(hexs) = value.strip_prefix("len=") {
            stable &= label == "data-x-1000" && hexs == "1013";
            continue;
        }
        let bytes: Vec<u8> = (0..value.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&value[i..i + 2], 16).unwrap())
            .collect();
        match Packet::decode(&bytes) {
            Ok(p) => stable &= p.encode() == bytes,
            Err(_) => stable = false,
        }
        vectors += 1;
    }
    outcome(
        bad == 0 && stable && vectors > 0,
        format!("10000 random packets, {bad} mismatches; {vectors} golden vectors stable={stable}"),
    )
}

fn c6() -> Outcome {
    let mut flips = 0;
    let mut missed = 0;
    for fmt in [MetadataFormat::DigestList, MetadataFormat::MerkleRoots] {
        let col = collection(&[("f", 40)], 16);
        let (md, _) = build_metadata(&col, fmt, DigestAlgo::Sha256, &signer());
        let pkts = &col.packets[0];
        assert_eq!(pkts.len(), 3);
        for target in 0..pkts.len() {
            for pos in 0..pkts[target].content.len() {
                flips += 1;
                let mut ctx = VerifyContext::default();
                let mut rejected = false;
                for (i, p) in pkts.iter().enumerate() {
                    let p = if i == target {
                        let mut c = p.content.to_vec();
                        c[pos] ^= 0xff;
                        let mut d = p.clone();
                        d.content = c.into();
                        d
                    } else {
                        p.clone()
                    };
                    if let Ok(Verdict::Rejected { .. }) = verify_packet(&md, &p, &mut ctx) {
                        rejected = true;
                    }
                }
                if !rejected {
                    missed += 1;
                }
            }
        }
    }
    outcome(missed == 0, format!("{flips} single-byte flips, {missed} accepted"))
}

fn forwards(actions: &[Action]) -> usize {
    actions
        .iter()
        .filter(|a| matches!(a, Action::SendInterest { .. }))
        .count()
}

fn c7() -> Outcome {
    let mut notes = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut always = PureForwarderPolicy { p_fwd: 1.0 };

    // aggregation
    let mut fw = Forwarder::new(ForwarderConfig::default());
    let a = fw.on_interest(&Interest::new(name("/c/f/1"), 1), RADIO_FACE, 0.0, &mut always, &mut rng);
    let b = fw.on_interest(&Interest::new(name("/c/f/1"), 2), RADIO_FACE, 0.001, &mut always, &mut rng);
    let aggregated = forwards(&a) == 1 && b.is_empty() && fw.counters.aggregated == 1;
    notes.push(format!("aggregation={aggregated}"));

    // suppression timer: a failed forward blocks the name for exactly the
    // suppression duration after the PIT deadline
    let cfg = ForwarderConfig::default();
    let mut fw = Forwarder::new(cfg);
    let n3 = name("/c/f/3");
    let first = fw.on_interest(&Interest::new(n3.clone(), 1), RADIO_FACE, 0.0, &mut always, &mut rng);
    let deadline = cfg.pit_lifetime;
    let during = fw.on_interest(
        &Interest::new(n3.clone(), 2),
        RADIO_FACE,
        deadline + cfg.suppress_duration / 2.0,
        &mut always,
        &mut rng,
    );
    let expiry_ok = fw.suppression.expiry(&n3) == Some(deadline + cfg.suppress_duration);
    let after = fw.on_interest(
        &Interest::new(n3.clone(), 3),
        RADIO_FACE,
        deadline + cfg.suppress_duration + 1e-6,
        &mut always,
        &mut rng,
    );
    let suppression = forwards(&first) == 1 && during.is_empty() && expiry_ok && forwards(&after) == 1;
    notes.push(format!("suppression={suppression}"));

    // scripted replay: A lacks 6 packets; C holds 3, B 2, D 1
    let bm = |set: &[usize]| {
        let mut b = Bitmap::new(name("/c"), 6);
        for g in set {
            b.set(*g);
        }
        b
    };
    let (a, c, b, d) = (bm(&[]), bm(&[0, 1, 2]), bm(&[3, 4]), bm(&[5]));
    let mut prio = PrioritizationState::with_requester(0.02, &a);
    let group = |p: &PrioritizationState, own: &Bitmap| peba_group(p.contribution(own), p.missing(), 2);
    let round1 = (group(&prio, &c), group(&prio, &b), group(&prio, &d));
    prio.on_heard(&c);
    let round2 = (group(&prio, &b), group(&prio, &d));
    let mut st = PebaState::new(2, 0.001);
    st.on_collision();
    let two = st.slot_count();
    st.on_collision();
    let four = st.slot_count();
    let peba = round1 == (0, 1, 1) && round2 == (0, 1) && (two, four) == (2, 4);
    notes.push(format!("peba round1={round1:?} round2={round2:?} slots={two},{four}"));

    outcome(aggregated && suppression && peba, notes.join(", "))
}

fn c8() -> Outcome {
    let col = build_collection(
        name("/damaged-bridge-1533783192"),
        vec![
            FileSpec::new("bridge-picture", vec![1u8; 100 * 1024]),
            FileSpec::new("bridge-location", vec![2u8; 3 * 1024]),
        ],
        1024,
        &signer(),
    )
    .unwrap();
    let (md, _) = build_metadata(&col, MetadataFormat::DigestList, DigestAlgo::Sha256, &signer());
    let n100 = md.packet_name(100).unwrap().to_string();
    let back = md.global_index(&name("/damaged-bridge-1533783192/bridge-location/0")).unwrap();
    let ok = md.locate(100).unwrap() == (1, 0) && back == 100 && n100 == "/damaged-bridge-1533783192/bridge-location/0";
    outcome(ok, format!("g100 -> {n100}"))
}

fn pin(w: &mut World, at: &[(f64, f64)]) {
    for (i, &(x, y)) in at.iter().enumerate() {
        w.mobility.movers[i] = Mover {
            pos: Position { x, y },
            speed: 0.0,
            heading: 0.0,
            mobile: false,
        };
    }
}

fn small() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.nodes = NodeCounts {
        repos: 1,
        downloaders: 1,
        pure_forwarders: 0,
        intermediates: 0,
    };
    cfg.collection.files = 3;
    cfg.collection.file_size = 4000;
    cfg.medium.loss_rate = 0.0;
    cfg.run.max_sim_time = 120.0;
    cfg
}

/// J (repo) - K (intermediate) - A (downloader), A and J out of range. K
/// holds a first-hand view of J, A a relayed one. Discovery stays out of
/// the run and requests are serial, so no transmission of the chain can
/// overlap another.
fn chain(seed: u64) -> MetricsReport {
    let mut cfg = small();
    cfg.nodes.intermediates = 1;
    cfg.peer.pipeline_depth = 1;
    cfg.peer.discovery_period_min = 1e6;
    cfg.peer.discovery_period_max = 1e6;
    cfg.peer.knowledge_ttl = 1e6;
    let mut w = World::new(&cfg, seed, TraceSink::Off).unwrap();
    pin(&mut w, &[(100.0, 100.0), (260.0, 100.0), (180.0, 100.0)]);
    let j = w.nodes[0].app.as_ref().unwrap();
    let (j_id, s) = (j.peer_id, j.session.as_ref().unwrap());
    let (c, total, segs) = (s.collection.clone(), s.total(), s.segment_count());
    let k_id = w.nodes[2].peer_id;
    let k = w.nodes[2].app.as_mut().unwrap();
    k.knowledge.heard(j_id, 0.0, true);
    k.knowledge.set_summary(j_id, &c, total, total, segs, 1, 0.0);
    let a = w.nodes[1].app.as_mut().unwrap();
    a.knowledge.heard(k_id, 0.0, true);
    a.knowledge.set_summary(j_id, &c, total, total, segs, 2, 0.0);
    a.session.as_mut().unwrap().expect_segments(segs);
    w.run();
    w.report()
}

fn c9() -> Outcome {
    let mut pair_ok = 0;
    for mode in [ExchangeMode::BitmapsFirst, ExchangeMode::Interleaved] {
        for strategy in [RpfStrategy::Local, RpfStrategy::Encounter] {
            let mut cfg = small();
            cfg.peer.exchange_mode = mode;
            cfg.peer.strategy = strategy;
            let mut w = World::new(&cfg, 3, TraceSink::Off).unwrap();
            pin(&mut w, &[(100.0, 100.0), (150.0, 100.0)]);
            w.run();
            let r = w.report();
            if !r.timed_out && r.completed() == 1 {
                pair_ok += 1;
            }
        }
    }
    let (mut ok, mut failed) = (0, 0);
    let mut chain_done = true;
    for seed in 1..=10 {
        let r = chain(seed);
        chain_done &= !r.timed_out;
        ok += r.nodes[2].forwards_succeeded;
        failed += r.nodes[2].forwards_failed;
    }
    let ratio = ok as f64 / (ok + failed).max(1) as f64;
    outcome(
        pair_ok == 4 && chain_done && ok > 0 && failed == 0,
        format!("static pair {pair_ok}/4 combinations; chain forwards {ok} ok {failed} failed, ratio {:.0}%", ratio * 100.0),
    )
}

/// One-sided sign test: `wins` of `n` untied pairs favour the hypothesis.
fn sign_p(wins: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).unwrap();
    1.0 - b.cdf(wins - 1)
}

/// Pairs `(treatment, baseline)`; counts pairs where `better(t, b)`, ties
/// dropped.
fn sign_test(pairs: &[(f64, f64)], lower_is_better: bool) -> (u64, u64, f64) {
    let mut wins = 0;
    let mut n = 0;
    for &(t, b) in pairs {
        if t == b {
            continue;
        }
        n += 1;
        if (t < b) == lower_is_better {
            wins += 1;
        }
    }
    (wins, n, sign_p(wins, n))
}

struct Desk {
    base: ScenarioConfig,
    jobs: usize,
}

impl Desk {
    fn run(&self, f: impl Fn(&mut ScenarioConfig), ranges: &[f64]) -> Vec<MetricsReport> {
        let mut out = Vec::new();
        for &r in ranges {
            let mut cfg = self.base.clone();
            cfg.medium.range = r;
            f(&mut cfg);
            let opts = BatchOptions {
                jobs: self.jobs,
                trace_dir: None,
                label: "acceptance".into(),
            };
            out.extend(run_batch(&cfg, &opts).unwrap());
        }
        out
    }
}

fn times(rs: &[MetricsReport]) -> Vec<f64> {
    rs.iter().map(|r| r.median_download_time()).collect()
}

fn txs(rs: &[MetricsReport]) -> Vec<f64> {
    rs.iter().map(|r| r.total_transmissions() as f64).collect()
}

fn paired(t: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
    t.iter().copied().zip(b.iter().copied()).collect()
}

/// Treatment beats baseline: median no worse and the sign test significant.
fn directional(what: &str, t: &[f64], b: &[f64], lower_is_better: bool) -> Outcome {
    let (mt, mb) = (median(t), median(b));
    let (wins, n, p) = sign_test(&paired(t, b), lower_is_better);
    let median_ok = if lower_is_better { mt <= mb } else { mt >= mb };
    outcome(
        median_ok && p < ALPHA,
        format!("{what}: median {mt:.1} vs {mb:.1}, better in {wins}/{n} pairs, sign-test p={p:.4}"),
    )
}

fn main() {
    let strict = std::env::var_os("DAPES_ACCEPTANCE_STRICT").is_some();
    let started = Instant::now();
    let mut results: Vec<(u32, bool, Outcome)> = Vec::new();
    let exact: [(u32, fn() -> Outcome); 9] = [
        (1, c1),
        (2, c2),
        (3, c3),
        (4, c4),
        (5, c5),
        (6, c6),
        (7, c7),
        (8, c8),
        (9, c9),
    ];
    for (id, f) in exact {
        let o = f();
        println!("criterion {id:2}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, true, o));
    }

    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let base = load_config(&root.join("configs/desk_scale.cfg")).unwrap();
    let desk = Desk {
        base,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let mut report = |id: u32, o: Outcome| {
        println!("criterion {id:2}: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, false, o));
    };

    let first_all = |c: &mut ScenarioConfig| {
        c.peer.exchange_mode = ExchangeMode::BitmapsFirst;
        c.peer.b = BitmapCount::All;
    };
    let local = desk.run(|c| first_all(c), &RANGES);
    let encounter = desk.run(
        |c| {
            first_all(c);
            c.peer.strategy = RpfStrategy::Encounter;
        },
        &RANGES,
    );
    report(10, directional("download time local vs encounter", &times(&local), &times(&encounter), true));

    let baseline = desk.run(|_| {}, &RANGES);
    let random_start = desk.run(|c| c.peer.random_start = true, &RANGES);
    report(11, directional("download time randomStart vs lowest-index", &times(&random_start), &times(&baseline), true));

    let top = &RANGES[2..];
    let peba_on: Vec<MetricsReport> = baseline[2 * desk.base.run.seeds.len()..].to_vec();
    let peba_off = desk.run(|c| c.peer.peba = false, top);
    report(12, directional("transmissions PEBA vs linear at two largest ranges", &txs(&peba_on), &txs(&peba_off), true));

    let interleaved3 = desk.run(
        |c| {
            c.peer.exchange_mode = ExchangeMode::Interleaved;
            c.peer.b = BitmapCount::Count(3);
        },
        &RANGES,
    );
    report(13, directional("download time interleaved b=3 vs first all", &times(&interleaved3), &times(&local), true));

    let probs = [0.0, 0.2, 0.4, 0.6];
    let sweep: Vec<Vec<MetricsReport>> = probs
        .iter()
        .map(|&p| {
            if p == desk.base.peer.forward_prob_no_knowledge {
                baseline.clone()
            } else {
                desk.run(|c| c.peer.forward_prob_no_knowledge = p, &RANGES)
            }
        })
        .collect();
    let mt: Vec<f64> = sweep.iter().map(|r| median(&times(r))).collect();
    let mx: Vec<f64> = sweep.iter().map(|r| median(&txs(r))).collect();
    let time_mono = mt.windows(2).all(|w| w[1] <= w[0]);
    let tx_mono = mx.windows(2).all(|w| w[1] >= w[0]);
    let (tw, tn, tp) = sign_test(&paired(&times(&sweep[3]), &times(&sweep[0])), true);
    let (xw, xn, xp) = sign_test(&paired(&txs(&sweep[3]), &txs(&sweep[0])), false);
    report(
        14,
        outcome(
            time_mono && tx_mono && tp < ALPHA && xp < ALPHA,
            format!(
                "p={probs:?}: median time {:?}, median tx {:?}; p=0.6 vs 0 faster {tw}/{tn} (p={tp:.4}), more tx {xw}/{xn} (p={xp:.4})",
                mt.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>(),
                mx.iter().map(|x| format!("{x:.0}")).collect::<Vec<_>>(),
            ),
        ),
    );

    let c15 = {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = desk.base.clone();
        cfg.run.seeds = vec![1];
        let mut files = Vec::new();
        for rerun in 0..2 {
            let sub = dir.path().join(format!("run{rerun}"));
            let opts = BatchOptions {
                jobs: 1,
                trace_dir: Some(sub.clone()),
                label: "desk".into(),
            };
            let reports = run_batch(&cfg, &opts).unwrap();
            write_run_csv(&sub.join("metrics.csv"), &reports).unwrap();
            let trace = std::fs::read(sub.join("desk-seed1.tsv")).unwrap();
            let metrics = std::fs::read(sub.join("metrics.csv")).unwrap();
            files.push((trace, metrics));
        }
        let same = files[0] == files[1] && !files[0].0.is_empty();
        outcome(
            same,
            format!("trace {} bytes, metrics {} bytes, identical={same}", files[0].0.len(), files[0].1.len()),
        )
    };
    println!("criterion 15: {} - {}", if c15.pass { "PASS" } else { "FAIL" }, c15.detail);
    results.push((15, true, c15));

    results.sort_by_key(|r| r.0);
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let hard: Vec<u32> = results.iter().filter(|r| r.1 && !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass, failing {:?}, {:.0}s",
        results.len() - failed.len(),
        results.len(),
        failed,
        started.elapsed().as_secs_f64()
    );
    if !hard.is_empty() || (strict && !failed.is_empty()) {
        std::process::exit(1);
    }
}

