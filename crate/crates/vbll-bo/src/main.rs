//! Thin command-line front end over the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vbll_bo::harness::{
    export_curves, load_records, run_experiment, sweep, ExperimentConfig, ExportMetric, SWEEP_AXES,
};

/// Environment variable holding the default output root.
const OUT_ENV: &str = "VBLL_BO_OUT";

#[derive(Parser)]
#[command(name = "vbll-bo", version, about = "Bayesian optimization with VBLL surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOverrides {
    /// Comma-separated seed list overriding the config.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output root (default: config `output_dir`, then $VBLL_BO_OUT, then `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel seed jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Expand a config across one hyperparameter axis and run each point.
    Sweep {
        config: PathBuf,
        /// Axis name, one of the recognized hyperparameters.
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: RunOverrides,
    },
    /// Export per-iteration mean and 10/90-percentile curves from a record directory.
    Export {
        dir: PathBuf,
        /// `best`, `hv`, or `logdiff_hv`.
        #[arg(long)]
        metric: String,
        /// Maximum hypervolume, required for `logdiff_hv`.
        #[arg(long)]
        max_hv: Option<f64>,
        /// Output file (default: `<dir>/curves_<metric>.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available benchmark problems.
    ListProblems,
}

fn resolve_out(cfg: &ExperimentConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn git_describe() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()?;
    if out.status.success() {
        Some(String::from_utf8_lossy(&out.stdout).trim().to_string())
    } else {
        None
    }
}

fn load_config(path: &PathBuf, overrides: &RunOverrides) -> Result<ExperimentConfig, vbll_bo::Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if !overrides.seed.is_empty() {
        cfg.seeds = overrides.seed.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(all_ok) => {
            if all_ok {
                ExitCode::SUCCESS
            } else {
                // Partial results are kept on disk.
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool, vbll_bo::Error> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let out = resolve_out(&cfg, &overrides.out);
            let outcomes = run_experiment(&cfg, &out, overrides.jobs, git_describe())?;
            let mut ok = true;
            for o in &outcomes {
                match &o.record {
                    Ok(r) => {
                        let last = r.rows.last().expect("non-empty record");
                        println!(
                            "seed {:>3}: {} = {:.6}, fit {:.2}s, acq {:.2}s",
                            o.seed,
                            r.metric_name,
                            last.metric,
                            last.cumulative_fit_seconds,
                            last.cumulative_acq_seconds
                        );
                    }
                    Err(msg) => {
                        ok = false;
                        eprintln!("seed {:>3}: FAILED: {msg}", o.seed);
                    }
                }
            }
            println!("records in {}", out.join(cfg.experiment_name()).display());
            Ok(ok)
        }
        Command::Sweep { config, axis, values, overrides } => {
            if !SWEEP_AXES.contains(&axis.as_str()) {
                return Err(vbll_bo::Error::InvalidConfig(format!(
                    "unknown axis `{axis}`; expected one of {SWEEP_AXES:?}"
                )));
            }
            let cfg = load_config(&config, &overrides)?;
            let out = resolve_out(&cfg, &overrides.out);
            let results = sweep(&cfg, &axis, &values, &out, overrides.jobs, git_describe())?;
            let mut ok = true;
            for (value, outcomes) in &results {
                let failed = outcomes.iter().filter(|o| o.record.is_err()).count();
                if failed > 0 {
                    ok = false;
                }
                println!("{axis} = {value}: {}/{} seeds ok", outcomes.len() - failed, outcomes.len());
            }
            Ok(ok)
        }
        Command::Export { dir, metric, max_hv, out } => {
            let metric = ExportMetric::parse(&metric)?;
            let records = load_records(&dir)?;
            let body = export_curves(&records, metric, max_hv)?;
            let path = out.unwrap_or_else(|| {
                let name = match metric {
                    ExportMetric::Best => "curves_best.csv",
                    ExportMetric::Hv => "curves_hv.csv",
                    ExportMetric::LogDiffHv => "curves_logdiff_hv.csv",
                };
                dir.join(name)
            });
            std::fs::write(&path, body)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::ListProblems => {
            for name in vbll_bo::benchmarks::list_problems() {
                println!("{name}");
            }
            Ok(true)
        }
    }
}
