use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dapes_core::analysis::FetchMode;
use dapes_sim::oracle::{evaluate, Query};
use dapes_sim::{
    default_out_dir, load_config, parse_seeds, parse_values, run_batch, write_run_csv, write_sweep_csv, BatchOptions,
    CliError, SweepParam, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "dapes-sim", version, about = "Simulate peer-to-peer file sharing over a lossy wireless medium")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario file (TOML)
    config: PathBuf,
    /// Seed list overriding the config, e.g. `1..10` or `1,4,7`
    #[arg(long)]
    seeds: Option<String>,
    /// Output CSV; defaults to a file named after the config in the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one tab-separated trace per seed into this directory
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every seed of a scenario and write per-node metrics
    #[command(after_help = format!("Default output directory: ${OUT_DIR_ENV}, else the working directory."))]
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario once per value of one parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        /// range, forwardProbNoKnowledge, b, strategy, exchangeMode, peba, randomStart, lossRate
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Evaluate an analytical estimate
    Oracle {
        #[command(subcommand)]
        query: OracleCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    BitmapsFirst,
    Interleaved,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Bytes of N digest subnames: N INDEX DIGEST FRAMING
    MetadataSize { n: u64, index: u64, digest: u64, framing: u64 },
    /// Rarest-first effectiveness: N K
    Eta { n: u64, k: u32 },
    /// Mean bitmap transmission delay: SLOTS GROUPS TAU
    Tdelay { slots: u32, groups: u32, tau: f64 },
    /// Time left for data fetching: DELTA_T T_DELAY D B MODE
    FetchTime {
        delta_t: f64,
        t_delay: f64,
        d: f64,
        b: u32,
        #[arg(value_enum)]
        mode: Mode,
    },
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

fn prepare(common: &Common) -> Result<(dapes_core::sim::ScenarioConfig, BatchOptions), CliError> {
    let mut cfg = load_config(&common.config)?;
    if let Some(s) = &common.seeds {
        cfg.run.seeds = parse_seeds(s)?;
    }
    let opts = BatchOptions {
        jobs: common.jobs,
        trace_dir: common.trace_dir.clone(),
        label: stem(&common.config),
    };
    Ok((cfg, opts))
}

fn out_path(common: &Common, suffix: &str) -> Result<PathBuf, CliError> {
    let p = match &common.out {
        Some(p) => p.clone(),
        None => default_out_dir().join(format!("{}{suffix}.csv", stem(&common.config))),
    };
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(p)
}

fn execute(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Run { common } => {
            let (cfg, opts) = prepare(&common)?;
            let reports = run_batch(&cfg, &opts)?;
            let out = out_path(&common, "")?;
            write_run_csv(&out, &reports)?;
            println!("{}", out.display());
        }
        Cmd::Sweep { common, param, values } => {
            let (cfg, mut opts) = prepare(&common)?;
            let param = SweepParam::parse(&param)?;
            let values = parse_values(&values)?;
            let label = opts.label.clone();
            let mut results = Vec::with_capacity(values.len());
            for v in values {
                let c = param.apply(&cfg, &v)?;
                opts.label = format!("{label}-{}-{v}", param.as_str());
                results.push((v, run_batch(&c, &opts)?));
            }
            let out = out_path(&common, &format!("-sweep-{}", param.as_str()))?;
            write_sweep_csv(&out, param.as_str(), &results)?;
            println!("{}", out.display());
        }
        Cmd::Oracle { query } => {
            let q = match query {
                OracleCmd::MetadataSize { n, index, digest, framing } => Query::MetadataSize { n, index, digest, framing },
                OracleCmd::Eta { n, k } => Query::Eta { n, k },
                OracleCmd::Tdelay { slots, groups, tau } => Query::TDelay { slots, groups, tau },
                OracleCmd::FetchTime { delta_t, t_delay, d, b, mode } => Query::FetchTime {
                    delta_t,
                    t_delay,
                    d,
                    b,
                    mode: match mode {
                        Mode::BitmapsFirst => FetchMode::BitmapsFirst,
                        Mode::Interleaved => FetchMode::Interleaved,
                    },
                },
            };
            println!("{}", evaluate(&q)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
