//! `dcsp-sim`: Monte-Carlo sweeps and analysis curves as CSV.
//!
//! Exit codes: 0 ok, 1 bad configuration or usage, 2 internal or i/o error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dcsp::experiments::{
    analysis_curves, curves_csv, run_scaling_sweep, run_success_sweep, scaling_csv, success_csv,
    Algorithm, ExperimentConfig, MRange,
};
use dcsp::oracle::run_oracle_suite;
use dcsp::{Error, Seed, SignalModel};

/// Overrides the default output directory (`results`).
const OUT_DIR_VAR: &str = "DCSP_SIM_OUT_DIR";

#[derive(Parser)]
#[command(name = "dcsp-sim", version, about = "Decentralized support recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success rate versus measurements per node.
    Success(SuccessArgs),
    /// Iterations and message counts versus network size, with g = Q/2.
    Scaling(ScalingArgs),
    /// Closed-form vote-bound and iteration-bound curves.
    Curves {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force cross-checks of the algorithms.
    OracleCheck {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "dcsp")]
    algorithm: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Signal-to-noise ratio in dB, or `none` for noise-free.
    #[arg(long, default_value = "18")]
    snr_db: String,
    #[arg(long)]
    seed: u64,
    /// gaussian, identical, exp:C:P or power:C:P.
    #[arg(long, default_value = "gaussian")]
    model: String,
    /// Defaults to 3K.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Fill the runtime column with wall-clock means (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuccessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 10)]
    q: usize,
    #[arg(long, default_value_t = 5)]
    g: usize,
    /// M or start:stop:step, inclusive.
    #[arg(long, default_value = "20:60:5")]
    m: String,
    #[arg(long, default_value_t = 500)]
    trials: usize,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated network sizes.
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    q_list: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

fn parse_snr(s: &str) -> Result<Option<f64>, Error> {
    if s == "none" {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::Config {
        field: "snr-db".into(),
        message: format!("`{s}` is not a number or `none`"),
    })
}

fn build_config(common: &Common, nodes: usize, g: usize, m: MRange, trials: usize) -> Result<ExperimentConfig, Error> {
    let algorithm: Algorithm = common.algorithm.parse()?;
    let model: SignalModel = common.model.parse()?;
    Ok(ExperimentConfig {
        algorithm,
        nodes,
        n: common.n,
        k: common.k,
        g,
        m,
        snr_db: parse_snr(&common.snr_db)?,
        trials,
        seed: Seed(common.seed),
        model,
        max_iters: common.max_iters,
        timing: common.timing,
    })
}

fn output_path(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let dir = std::env::var_os(OUT_DIR_VAR).map_or_else(|| PathBuf::from("results"), PathBuf::from);
        dir.join(format!("{name}.csv"))
    })
}

fn write_output(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Success(args) => {
            let m: MRange = args.m.parse()?;
            let config = build_config(&args.common, args.q, args.g, m, args.trials)?;
            let rows = run_success_sweep(&config)?;
            write_output(&output_path(args.common.out, "success"), &success_csv(&rows))
        }
        Command::Scaling(args) => {
            // Q and g are set per network size by the sweep.
            let config = build_config(&args.common, 1, 1, MRange::single(args.m), args.trials)?;
            let rows = run_scaling_sweep(&config, &args.q_list)?;
            write_output(&output_path(args.common.out, "scaling"), &scaling_csv(&rows)?)
        }
        Command::Curves { out } => {
            let points = analysis_curves()?;
            write_output(&output_path(out, "curves"), &curves_csv(&points))
        }
        Command::OracleCheck { seed, trials } => {
            if trials == 0 {
                return Err(Error::Config { field: "trials".into(), message: "need at least one trial".into() }.into());
            }
            let report = run_oracle_suite(Seed(seed), trials)?;
            for c in &report.checks {
                let status = if c.passed() { "ok" } else { "FAILED" };
                println!("{:<30} {status:>6}  {} failures / {} checked", c.name, c.failures, c.checked);
            }
            anyhow::ensure!(report.passed(), "oracle suite reported failures");
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Config { .. }
            | Error::BadParams(_)
            | Error::BadG { .. }
            | Error::BadK { .. }
            | Error::BadDimensions(_),
        ) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
