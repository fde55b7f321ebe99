//! Batch execution on top of the core simulator: config files, seed lists,
//! parameter sweeps and CSV export.

use std::fs;
use std::path::{Path, PathBuf};

use dapes_core::advertisement::RpfStrategy;
use dapes_core::peer::{BitmapCount, ExchangeMode};
use dapes_core::sim::{percentile, run_scenario_traced, ConfigError, MetricsReport, ScenarioConfig, TraceSink};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use thiserror::Error;

pub mod oracle;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DAPES_OUT_DIR";

/// Column order of the metrics table. Changing it is a format change.
pub const CSV_HEADER: [&str; 16] = [
    "kind",
    "seed",
    "node",
    "role",
    "download_time",
    "completed",
    "tx_discovery",
    "tx_metadata",
    "tx_bitmap",
    "tx_data",
    "tx_forwards",
    "tx_total",
    "collisions",
    "forwards_succeeded",
    "forwards_failed",
    "forward_success_ratio",
];

/// Percentile used for the aggregate row.
pub const AGGREGATE_PERCENTILE: f64 = 90.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Domain(#[from] dapes_core::analysis::DomainError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for anything the caller can fix in its input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Domain(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses and validates a scenario. Unknown keys are rejected; parse errors
/// carry the line and column of the offending key.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `cfg` in the dialect [`parse_config`] reads.
pub fn render_config(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: path.display().to_string(),
        source,
    })
}

/// Accepts `7`, `1,2,5` and inclusive ranges `1..10`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
    /// Directory for one trace file per seed.
    pub trace_dir: Option<PathBuf>,
    /// File stem for trace files.
    pub label: String,
}

/// Runs every seed of `cfg`. Results come back in seed-list order whatever
/// the completion order.
pub fn run_batch(cfg: &ScenarioConfig, opts: &BatchOptions) -> Result<Vec<MetricsReport>, CliError> {
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let one = |seed: u64| -> Result<MetricsReport, CliError> {
        let sink = match &opts.trace_dir {
            Some(dir) => {
                let p = dir.join(format!("{}-seed{seed}.tsv", opts.label));
                TraceSink::file(&p).map_err(io_err(&p))?
            }
            None => TraceSink::Off,
        };
        let (report, _) = run_scenario_traced(cfg, seed, sink).map_err(|source| CliError::Config {
            path: opts.label.clone(),
            source,
        })?;
        Ok(report)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| cfg.run.seeds.par_iter().map(|&s| one(s)).collect())
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

fn ratio(ok: u64, failed: u64) -> String {
    match ok + failed {
        0 => String::new(),
        n => fmt_f(ok as f64 / n as f64),
    }
}

/// Rows for one batch: one per (seed, node), then the aggregate row.
///
/// The aggregate takes, per seed, the median downloader time (unfinished
/// downloaders counted at the time limit) and the summed counters, then the
/// 90th percentile of each across seeds. Its `completed` column is the
/// number of finished downloads over all seeds.
pub fn metrics_rows(reports: &[MetricsReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for n in &r.nodes {
            let t = n.tx;
            let is_dl = n.role == dapes_core::sim::NodeRole::Downloader;
            rows.push(vec![
                "node".to_string(),
                r.seed.to_string(),
                n.node.to_string(),
                n.role.as_str().to_string(),
                n.download_time.map(fmt_f).unwrap_or_default(),
                if is_dl { (n.download_time.is_some() as u8).to_string() } else { String::new() },
                t.discovery.to_string(),
                t.metadata.to_string(),
                t.bitmap.to_string(),
                t.data.to_string(),
                t.forwards.to_string(),
                t.total().to_string(),
                n.collisions.to_string(),
                n.forwards_succeeded.to_string(),
                n.forwards_failed.to_string(),
                ratio(n.forwards_succeeded, n.forwards_failed),
            ]);
        }
    }
    if reports.is_empty() {
        return rows;
    }
    let p = |f: &dyn Fn(&MetricsReport) -> f64| {
        let xs: Vec<f64> = reports.iter().map(f).collect();
        percentile(&xs, AGGREGATE_PERCENTILE)
    };
    let ratios: Vec<f64> = reports.iter().filter_map(MetricsReport::forward_success_ratio).collect();
    rows.push(vec![
        "p90".to_string(),
        String::new(),
        String::new(),
        "all".to_string(),
        fmt_f(p(&|r| r.median_download_time())),
        reports.iter().map(MetricsReport::completed).sum::<usize>().to_string(),
        fmt_f(p(&|r| r.tx.discovery as f64)),
        fmt_f(p(&|r| r.tx.metadata as f64)),
        fmt_f(p(&|r| r.tx.bitmap as f64)),
        fmt_f(p(&|r| r.tx.data as f64)),
        fmt_f(p(&|r| r.tx.forwards as f64)),
        fmt_f(p(&|r| r.tx.total() as f64)),
        fmt_f(p(&|r| r.collisions as f64)),
        fmt_f(p(&|r| r.forwards_succeeded as f64)),
        fmt_f(p(&|r| r.forwards_failed as f64)),
        fmt_f(percentile(&ratios, AGGREGATE_PERCENTILE)),
    ]);
    rows
}

pub fn write_run_csv(path: &Path, reports: &[MetricsReport]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for row in metrics_rows(reports) {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Header of the sweep table: the swept parameter and value, then the
/// metrics columns.
pub fn sweep_header() -> Vec<&'static str> {
    let mut h = vec!["param", "value"];
    h.extend(CSV_HEADER);
    h
}

pub fn write_sweep_csv(path: &Path, param: &str, results: &[(String, Vec<MetricsReport>)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(sweep_header())?;
    for (value, reports) in results {
        for row in metrics_rows(reports) {
            let mut full = vec![param.to_string(), value.clone()];
            full.extend(row);
            w.write_record(&full)?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Parameters `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Range,
    ForwardProb,
    B,
    Strategy,
    ExchangeMode,
    Peba,
    RandomStart,
    LossRate,
}

impl SweepParam {
    pub const ALL: [SweepParam; 8] = [
        SweepParam::Range,
        SweepParam::ForwardProb,
        SweepParam::B,
        SweepParam::Strategy,
        SweepParam::ExchangeMode,
        SweepParam::Peba,
        SweepParam::RandomStart,
        SweepParam::LossRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Range => "range",
            SweepParam::ForwardProb => "forwardProbNoKnowledge",
            SweepParam::B => "b",
            SweepParam::Strategy => "strategy",
            SweepParam::ExchangeMode => "exchangeMode",
            SweepParam::Peba => "peba",
            SweepParam::RandomStart => "randomStart",
            SweepParam::LossRate => "lossRate",
        }
    }

    /// Accepts the camel-case name or the config key.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let alias = match s {
            "medium.range" => "range",
            "forward_prob_no_knowledge" | "peer.forward_prob_no_knowledge" => "forwardProbNoKnowledge",
            "peer.b" => "b",
            "peer.strategy" => "strategy",
            "exchange_mode" | "peer.exchange_mode" => "exchangeMode",
            "peer.peba" => "peba",
            "random_start" | "peer.random_start" => "randomStart",
            "loss_rate" | "medium.loss_rate" => "lossRate",
            other => other,
        };
        Self::ALL.into_iter().find(|p| p.as_str() == alias).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|p| p.as_str()).collect();
            CliError::Usage(format!("unknown sweep parameter '{s}', expected one of {}", names.join(", ")))
        })
    }

    /// Copy of `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig, CliError> {
        let v = value.trim();
        let bad = |why: &str| CliError::Usage(format!("{}: bad value '{v}': {why}", self.as_str()));
        let mut cfg = base.clone();
        match self {
            SweepParam::Range => cfg.medium.range = v.parse().map_err(|_| bad("not a number"))?,
            SweepParam::LossRate => cfg.medium.loss_rate = v.parse().map_err(|_| bad("not a number"))?,
            SweepParam::ForwardProb => {
                cfg.peer.forward_prob_no_knowledge = v.parse().map_err(|_| bad("not a number"))?
            }
            SweepParam::B => cfg.peer.b = v.parse::<BitmapCount>().map_err(|e| bad(&e.to_string()))?,
            SweepParam::Strategy => cfg.peer.strategy = enum_value::<RpfStrategy>(v).map_err(|e| bad(&e))?,
            SweepParam::ExchangeMode => {
                cfg.peer.exchange_mode = enum_value::<ExchangeMode>(v).map_err(|e| bad(&e))?
            }
            SweepParam::Peba => cfg.peer.peba = on_off(v).ok_or_else(|| bad("expected on/off"))?,
            SweepParam::RandomStart => cfg.peer.random_start = on_off(v).ok_or_else(|| bad("expected on/off"))?,
        }
        cfg.validate().map_err(|source| CliError::Config {
            path: format!("{}={v}", self.as_str()),
            source,
        })?;
        Ok(cfg)
    }
}

fn on_off(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "1" => Some(true),
        "off" | "false" | "0" => Some(false),
        _ => None,
    }
}

fn enum_value<T: DeserializeOwned>(v: &str) -> Result<T, String> {
    T::deserialize(toml::Value::String(v.to_string())).map_err(|e| e.to_string())
}

/// Splits a comma-separated value list; an empty list is a usage error.
pub fn parse_values(s: &str) -> Result<Vec<String>, CliError> {
    let v: Vec<String> = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(String::from)
        .collect();
    if v.is_empty() {
        return Err(CliError::Usage("empty value list".into()));
    }
    Ok(v)
}

/// Output directory from the environment, else the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("1..=2, 9").unwrap(), vec![1, 2, 9]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn unknown_key_names_the_key_and_line() {
        let e = parse_config("[medium]\nrange = 50.0\nfoo = 1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("foo"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_value_names_the_key() {
        let e = parse_config("[medium]\nloss_rate = 1.5\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::Invalid {
                key: "medium.loss_rate".into(),
                reason: "must be in [0, 1]".into()
            }
        );
    }

    #[test]
    fn empty_config_is_all_defaults() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn sweep_params_apply() {
        let base = ScenarioConfig::default();
        assert_eq!(SweepParam::parse("range").unwrap().apply(&base, "80").unwrap().medium.range, 80.0);
        let c = SweepParam::parse("strategy").unwrap().apply(&base, "encounter").unwrap();
        assert_eq!(c.peer.strategy, RpfStrategy::Encounter);
        let c = SweepParam::parse("exchangeMode").unwrap().apply(&base, "bitmaps-first").unwrap();
        assert_eq!(c.peer.exchange_mode, ExchangeMode::BitmapsFirst);
        assert!(!SweepParam::parse("peba").unwrap().apply(&base, "off").unwrap().peer.peba);
        assert_eq!(SweepParam::parse("b").unwrap().apply(&base, "3").unwrap().peer.b, BitmapCount::Count(3));
        assert!(SweepParam::parse("forwardProbNoKnowledge").unwrap().apply(&base, "1.5").is_err());
        assert!(SweepParam::parse("nope").is_err());
        assert!(parse_values(" , ").is_err());
    }
}
