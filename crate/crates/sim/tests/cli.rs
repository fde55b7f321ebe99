use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dapes-sim");

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn testdata(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)).unwrap()
}

fn dapes(args: &[&str], out_dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env("DAPES_OUT_DIR", out_dir)
        .output()
        .unwrap()
}

const TWO_NODES: &str = r#"
[nodes]
repos = 1
downloaders = 1
pure_forwarders = 0
intermediates = 0

[collection]
files = 2
file_size = 3000

[medium]
loss_rate = 0.0

[mobility]
arena_width = 60.0
arena_height = 60.0

[run]
seeds = [1]
max_sim_time = 60.0
"#;

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn csv_lines(p: &Path) -> Vec<String> {
    fs::read_to_string(p).unwrap().lines().map(String::from).collect()
}

#[test]
fn run_writes_node_rows_and_aggregate_to_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "pair.cfg", TWO_NODES);
    let o = dapes(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = csv_lines(&dir.path().join("pair.csv"));
    assert_eq!(format!("{}\n", lines[0]), testdata("run_header.csv"));
    assert_eq!(lines.len(), 1 + 2 + 1);
    assert!(lines[1].starts_with("node,1,0,repo,"));
    assert!(lines[2].starts_with("node,1,1,downloader,"));
    assert!(lines[3].starts_with("p90,,,all,"));
    // the downloader finished
    let dl: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(dl[5], "1");
    assert!(dl[4].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn seed_override_multiplies_rows_and_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "pair.cfg", TWO_NODES);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let ta = dir.path().join("ta");
    let tb = dir.path().join("tb");
    for (out, tr, jobs) in [(&a, &ta, "1"), (&b, &tb, "3")] {
        let o = dapes(
            &[
                "run",
                cfg.to_str().unwrap(),
                "--seeds",
                "1..3",
                "--jobs",
                jobs,
                "--out",
                out.to_str().unwrap(),
                "--trace-dir",
                tr.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(csv_lines(&a).len(), 1 + 3 * 2 + 1);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    for s in 1..=3 {
        let f = format!("pair-seed{s}.tsv");
        let x = fs::read(ta.join(&f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(tb.join(&f)).unwrap());
        let first = String::from_utf8(x).unwrap();
        assert_eq!(first.lines().next().unwrap().split('\t').count(), 5);
    }
}

#[test]
fn config_errors_exit_2_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "[medium]\nrange = 10.0\nrange_m = 5.0\n");
    let o = dapes(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("range_m"), "{err}");
    assert!(err.contains("line 3"), "{err}");

    let cfg = write_cfg(dir.path(), "bad2.cfg", "[peer]\nforward_prob_no_knowledge = 2.0\n");
    let o = dapes(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("peer"));

    let o = dapes(&["run", "/nonexistent/x.cfg"], dir.path());
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn sweep_writes_long_table_and_rejects_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "pair.cfg", TWO_NODES);
    let o = dapes(
        &["sweep", cfg.to_str().unwrap(), "--param", "peba", "--values", "on,off"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = csv_lines(&dir.path().join("pair-sweep-peba.csv"));
    assert_eq!(format!("{}\n", lines[0]), testdata("sweep_header.csv"));
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("peba,on,node,"));
    assert!(lines[6].starts_with("peba,off,p90,"));

    let o = dapes(&["sweep", cfg.to_str().unwrap(), "--param", "range", "--values", ""], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = dapes(&["sweep", cfg.to_str().unwrap(), "--param", "colour", "--values", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = dapes(&["sweep", cfg.to_str().unwrap(), "--param", "strategy", "--values", "psychic"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

fn oracle(args: &[&str]) -> (Option<i32>, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut a = vec!["oracle"];
    a.extend_from_slice(args);
    let o = dapes(&a, dir.path());
    (o.status.code(), String::from_utf8_lossy(&o.stdout).trim().to_string())
}

#[test]
fn oracle_subcommands() {
    assert_eq!(oracle(&["metadata-size", "1000", "4", "20", "8"]), (Some(0), "32000".into()));
    let (code, eta) = oracle(&["eta", "5000", "1"]);
    assert_eq!(code, Some(0));
    assert!((eta.parse::<f64>().unwrap() - 0.99830).abs() < 1e-5);
    let (_, t) = oracle(&["tdelay", "16", "2", "0.001"]);
    assert!((t.parse::<f64>().unwrap() - 0.00125).abs() < 1e-12);
    let (_, f) = oracle(&["fetch-time", "10", "0.5", "0.5", "4", "bitmaps-first"]);
    assert_eq!(f.parse::<f64>().unwrap(), 6.0);
    assert_eq!(oracle(&["tdelay", "1", "2", "0.001"]).0, Some(2));
    assert_eq!(oracle(&["eta", "1", "1"]).0, Some(2));
    assert_eq!(oracle(&["eta", "x", "1"]).0, Some(2));
}

#[test]
fn bundled_configs_load() {
    for name in ["paper_topology.cfg", "desk_scale.cfg"] {
        let p = repo_root().join("configs").join(name);
        let cfg = dapes_sim::load_config(&p).unwrap();
        assert_eq!(cfg.run.seeds.len(), 10, "{name}");
    }
    let full = dapes_sim::load_config(&repo_root().join("configs/paper_topology.cfg")).unwrap();
    assert_eq!(
        (full.nodes.repos, full.nodes.downloaders, full.nodes.pure_forwarders, full.nodes.intermediates),
        (4, 20, 10, 10)
    );
    assert_eq!(full.collection.file_size, 1 << 20);
    let desk = dapes_sim::load_config(&repo_root().join("configs/desk_scale.cfg")).unwrap();
    assert_eq!((desk.nodes.repos, desk.node_count()), (2, 22));
    assert_eq!(desk.collection.file_size, 102_400);
}

#[test]
fn default_config_dialect_is_frozen() {
    let text = dapes_sim::render_config(&dapes_core::sim::ScenarioConfig::default());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("testdata/default_config.toml");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &text).unwrap();
    }
    assert_eq!(text, testdata("default_config.toml"));
    assert_eq!(dapes_sim::parse_config(&text).unwrap(), dapes_core::sim::ScenarioConfig::default());
}
