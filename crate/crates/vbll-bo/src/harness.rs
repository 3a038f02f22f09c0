//! Experiment orchestration: config parsing, seeded multi-run execution of
//! the BO loop, metric tracking (best-so-far / hypervolume-so-far,
//! accumulated fit and acquisition time, re-init events), persistence, and
//! plot-ready exports.
//!
//! Results are plain delimited text, one file per (experiment, seed), with a
//! header row naming the columns; a JSON sidecar stores the fully resolved
//! config (so defaults never drift silently) and its hash. Seeds run as
//! independent jobs; each job owns its model and generators and appends to
//! its own file only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::nsga2::NsgaConfig;
use crate::acquisition::pareto::ParetoArchive;
use crate::acquisition::{
    nsga2_optimize, optimize_acqf_ei, optimize_ts_single, select_hvi_candidate, thompson_sample,
    unit_bounds,
};
use crate::benchmarks::{initial_design, make_problem, Problem, ProblemOptions};
use crate::error::{Error, Result};
use crate::surrogate::{bo_step, save_checkpoint, ReinitPolicy, SurrogateModel, TrainConfig};

/// Surrogate hyperparameters as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    /// Hidden width; the feature dimension equals the width.
    pub width: usize,
    /// Number of hidden layers.
    pub depth: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub prior_scale: f64,
    pub wishart_scale: f64,
    pub wishart_dof: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            width: 128,
            depth: 3,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            clip_norm: 1.0,
            batch_size: None,
            max_epochs: 10_000,
            patience: 100,
            prior_scale: 1.0,
            wishart_scale: 0.01,
            wishart_dof: 1.0,
        }
    }
}

impl SurrogateConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_layers: vec![self.width; self.depth],
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            clip_norm: self.clip_norm,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            prior_scale: self.prior_scale,
            wishart_scale: self.wishart_scale,
            wishart_dof: self.wishart_dof,
        }
    }
}

/// Re-initialization policy as configured; optional fields fall back to the
/// standard defaults (`center = horizon / 2`, `window_ratio = 0.5`,
/// `threshold = 0`, `period = 5`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReinitConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl Default for ReinitConfig {
    fn default() -> Self {
        ReinitConfig { kind: "always".into(), period: None, center: None, window_ratio: None, threshold: None }
    }
}

impl ReinitConfig {
    pub fn resolve(&self, horizon: usize) -> Result<ReinitPolicy> {
        match self.kind.as_str() {
            "always" => Ok(ReinitPolicy::Always),
            "periodic" => {
                let period = self.period.unwrap_or(5);
                if period == 0 {
                    return Err(Error::InvalidConfig("periodic policy needs period >= 1".into()));
                }
                Ok(ReinitPolicy::Periodic { period })
            }
            "sigmoid" => {
                let window_ratio = self.window_ratio.unwrap_or(0.5);
                if !(window_ratio > 0.0 && window_ratio <= 1.0) {
                    return Err(Error::InvalidConfig("window_ratio must be in (0, 1]".into()));
                }
                Ok(ReinitPolicy::Sigmoid {
                    center: self.center.unwrap_or(horizon as f64 / 2.0),
                    window_ratio,
                })
            }
            "event" => Ok(ReinitPolicy::Event { threshold: self.threshold.unwrap_or(0.0) }),
            other => Err(Error::InvalidConfig(format!("unknown reinit kind `{other}`"))),
        }
    }
}

/// Acquisition as configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcquisitionConfig {
    /// `logei`, `ts`, or `mo-ts`.
    pub kind: String,
    pub restarts: usize,
    pub raw_samples: usize,
    pub nsga_population: usize,
    pub nsga_generations: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            kind: "ts".into(),
            restarts: 10,
            raw_samples: 512,
            nsga_population: 100,
            nsga_generations: 200,
        }
    }
}

impl AcquisitionConfig {
    fn nsga_config(&self) -> NsgaConfig {
        NsgaConfig {
            population: self.nsga_population,
            generations: self.nsga_generations,
            ..NsgaConfig::default()
        }
    }
}

/// A full experiment: problem, horizon, seeds, surrogate and acquisition
/// settings, and the re-initialization policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub problem: String,
    #[serde(default)]
    pub problem_options: ProblemOptionsConfig,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub reinit: ReinitConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write a final model checkpoint per seed.
    #[serde(default)]
    pub save_checkpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ProblemOptionsConfig {
    pub noise_std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nn_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nn_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
}

impl ProblemOptionsConfig {
    fn to_options(&self) -> ProblemOptions {
        let mut o = ProblemOptions { noise_std: self.noise_std, ..ProblemOptions::default() };
        if let Some(s) = self.nn_seed {
            o.nn_seed = s;
        }
        if let Some(d) = self.nn_dim {
            o.nn_dim = d;
        }
        o.reference_point = self.reference_point.clone();
        o
    }
}

impl ExperimentConfig {
    pub fn from_json(body: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(body)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        if self.surrogate.width < 1 || self.surrogate.depth < 1 {
            return Err(Error::InvalidConfig("surrogate width/depth must be >= 1".into()));
        }
        if self.surrogate.max_epochs < 1 || self.surrogate.patience < 1 {
            return Err(Error::InvalidConfig("max_epochs and patience must be >= 1".into()));
        }
        let problem = self.make_problem()?;
        match self.acquisition.kind.as_str() {
            "logei" | "ts" => {
                if problem.output_dim() != 1 {
                    return Err(Error::InvalidConfig(format!(
                        "acquisition `{}` needs a single-objective problem",
                        self.acquisition.kind
                    )));
                }
            }
            "mo-ts" => {
                if problem.output_dim() < 2 {
                    return Err(Error::InvalidConfig("`mo-ts` needs a multi-objective problem".into()));
                }
                if problem.reference_point.is_none() {
                    return Err(Error::InvalidConfig("multi-objective run needs a reference point".into()));
                }
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown acquisition `{other}`")));
            }
        }
        self.reinit.resolve(self.horizon)?;
        Ok(())
    }

    pub fn make_problem(&self) -> Result<Problem> {
        make_problem(&self.problem, &self.problem_options.to_options())
    }

    pub fn experiment_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.problem.clone())
    }

    /// FNV-1a hash of the canonical JSON serialization.
    pub fn config_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in body.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// One per-iteration row of a run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `best_so_far` for single-objective runs, `hv_so_far` otherwise.
    pub metric: f64,
    pub cumulative_fit_seconds: f64,
    pub cumulative_acq_seconds: f64,
    pub reinit_flag: u8,
}

/// All rows of one seed's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub metric_name: String,
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn header(&self) -> String {
        let d = self.rows.first().map(|r| r.x.len()).unwrap_or(0);
        let k = self.rows.first().map(|r| r.y.len()).unwrap_or(0);
        let mut cols = vec!["seed".to_string(), "t".to_string()];
        cols.extend((0..d).map(|i| format!("x_{i}")));
        cols.extend((0..k).map(|i| format!("y_{i}")));
        cols.push(self.metric_name.clone());
        cols.push("cumulative_fit_seconds".into());
        cols.push("cumulative_acq_seconds".into());
        cols.push("reinit_flag".into());
        cols.join(",")
    }

    pub fn to_delimited(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header());
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", self.seed, row.t);
            for v in &row.x {
                let _ = write!(out, ",{v}");
            }
            for v in &row.y {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                row.metric, row.cumulative_fit_seconds, row.cumulative_acq_seconds, row.reinit_flag
            );
        }
        out
    }

    pub fn parse_delimited(body: &str) -> Result<RunRecord> {
        let mut lines = body.lines();
        let header = lines.next().ok_or_else(|| Error::MalformedRecord("empty file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let d = cols.iter().filter(|c| c.starts_with("x_")).count();
        let k = cols.iter().filter(|c| c.starts_with("y_")).count();
        let metric_name = cols
            .get(2 + d + k)
            .ok_or_else(|| Error::MalformedRecord("short header".into()))?
            .to_string();
        let mut seed = 0u64;
        let mut rows = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::MalformedRecord(format!("row {ln}: {} fields, expected {}", f.len(), cols.len())));
            }
            let parse =
                |s: &str| s.parse::<f64>().map_err(|e| Error::MalformedRecord(format!("row {ln}: {e}")));
            seed = f[0].parse().map_err(|e| Error::MalformedRecord(format!("row {ln}: {e}")))?;
            let t = f[1].parse().map_err(|e| Error::MalformedRecord(format!("row {ln}: {e}")))?;
            let x = f[2..2 + d].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
            let y = f[2 + d..2 + d + k].iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
            let metric = parse(f[2 + d + k])?;
            let fit = parse(f[3 + d + k])?;
            let acq = parse(f[4 + d + k])?;
            let reinit =
                f[5 + d + k].parse::<u8>().map_err(|e| Error::MalformedRecord(format!("row {ln}: {e}")))?;
            rows.push(RunRow {
                t,
                x,
                y,
                metric,
                cumulative_fit_seconds: fit,
                cumulative_acq_seconds: acq,
                reinit_flag: reinit,
            });
        }
        Ok(RunRecord { seed, metric_name, rows })
    }
}

/// Outcome of one seed's run; failures carry the error message and never
/// abort sibling seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub record: std::result::Result<RunRecord, String>,
}

/// Run one seed of the configured experiment.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    run_seed_full(cfg, seed).map(|(record, _)| record)
}

/// As [`run_seed`], additionally returning the final surrogate.
pub fn run_seed_full(cfg: &ExperimentConfig, seed: u64) -> Result<(RunRecord, Option<SurrogateModel>)> {
    cfg.validate()?;
    let problem = cfg.make_problem()?;
    let policy = cfg.reinit.resolve(cfg.horizon)?;
    let train_cfg = cfg.surrogate.train_config();
    let acq = &cfg.acquisition;
    let multi = problem.output_dim() >= 2;
    let metric_name = if multi { "hv_so_far" } else { "best_so_far" };

    let mut master = ChaCha12Rng::seed_from_u64(seed);
    let mut rng_init = ChaCha12Rng::seed_from_u64(master.gen());
    let mut rng_policy = ChaCha12Rng::seed_from_u64(master.gen());
    let mut rng_acq = ChaCha12Rng::seed_from_u64(master.gen());
    let mut rng_noise = ChaCha12Rng::seed_from_u64(master.gen());

    let mut data = initial_design(&problem, &mut rng_init)?;
    let mut archive = if multi {
        let r = problem.reference_point.clone().expect("validated");
        Some(ParetoArchive::new(r))
    } else {
        None
    };

    let mut rows: Vec<RunRow> = Vec::with_capacity(data.len() + cfg.horizon);
    let mut best = f64::NEG_INFINITY;
    let push_row = |rows: &mut Vec<RunRow>,
                        best: &mut f64,
                        archive: &mut Option<ParetoArchive>,
                        t: usize,
                        x: Vec<f64>,
                        y: Vec<f64>,
                        fit: f64,
                        acq_s: f64,
                        reinit: u8|
     -> Result<()> {
        let metric = if let Some(archive) = archive {
            archive.insert(y.clone());
            archive.hypervolume()?
        } else {
            *best = best.max(y[0]);
            *best
        };
        if let Some(prev) = rows.last() {
            assert!(metric >= prev.metric - 1e-12, "metric must be monotone");
        }
        rows.push(RunRow {
            t,
            x,
            y,
            metric,
            cumulative_fit_seconds: fit,
            cumulative_acq_seconds: acq_s,
            reinit_flag: reinit,
        });
        Ok(())
    };

    for i in 0..data.len() {
        let x = data.inputs()[i].clone();
        let y = data.targets()[i].clone();
        push_row(&mut rows, &mut best, &mut archive, i, x, y, 0.0, 0.0, 0)?;
    }

    let n_init = data.len();
    let mut model: Option<SurrogateModel> = None;
    let mut acq_seconds = 0.0;
    let ubounds = unit_bounds(problem.input_dim());

    for step in 0..cfg.horizon {
        let (m, reinit) =
            bo_step(model.take(), &policy, &data, &train_cfg, step, cfg.horizon, &mut rng_policy)?;

        let acq_start = Instant::now();
        let x_unit = match acq.kind.as_str() {
            "logei" => {
                let best_std = data
                    .targets()
                    .iter()
                    .map(|y| m.standardizer.standardize(y)[0])
                    .fold(f64::NEG_INFINITY, f64::max);
                optimize_acqf_ei(&m, best_std, &ubounds, acq.restarts, acq.raw_samples, &mut rng_acq)
            }
            "ts" => {
                let sample = thompson_sample(&m, &mut rng_acq);
                optimize_ts_single(&sample, &ubounds, acq.restarts, &mut rng_acq)
            }
            "mo-ts" => {
                let sample = thompson_sample(&m, &mut rng_acq);
                let front = nsga2_optimize(&sample, &ubounds, &acq.nsga_config(), &mut rng_acq);
                let ys: Vec<Vec<f64>> = front.iter().map(|(_, y)| y.clone()).collect();
                let idx =
                    select_hvi_candidate(archive.as_ref().expect("multi-objective"), &ys, &mut rng_acq)?;
                front[idx].0.clone()
            }
            other => return Err(Error::InvalidConfig(format!("unknown acquisition `{other}`"))),
        };
        acq_seconds += acq_start.elapsed().as_secs_f64();

        let x_raw = data.denormalize(&x_unit);
        let y = problem.evaluate_noisy(&x_raw, &mut rng_noise)?;
        data.push(x_raw.clone(), y.clone());
        push_row(
            &mut rows,
            &mut best,
            &mut archive,
            n_init + step,
            x_raw,
            y,
            m.fit_seconds,
            acq_seconds,
            u8::from(reinit),
        )?;
        model = Some(m);
    }

    Ok((RunRecord { seed, metric_name: metric_name.into(), rows }, model))
}

/// Sidecar metadata written next to the per-seed record files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub metric_name: String,
    pub columns: String,
    pub git_describe: Option<String>,
    pub failures: Vec<(u64, String)>,
}

/// Run every seed (up to `jobs` in parallel), writing one delimited record
/// file per seed plus a metadata sidecar into
/// `<out_dir>/<experiment name>/`. Returns the per-seed outcomes.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    jobs: usize,
    git_describe: Option<String>,
) -> Result<Vec<SeedOutcome>> {
    cfg.validate()?;
    let dir = out_dir.join(cfg.experiment_name());
    std::fs::create_dir_all(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let hash = cfg.config_hash();
    // Each worker writes only its own seed's files.
    let outcomes: Vec<SeedOutcome> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let run = || -> Result<RunRecord> {
                    let (record, final_model) = run_seed_full(cfg, seed)?;
                    std::fs::write(dir.join(format!("seed_{seed}.csv")), record.to_delimited())?;
                    if cfg.save_checkpoints {
                        if let Some(model) = &final_model {
                            save_checkpoint(model, &hash, &dir.join(format!("seed_{seed}_model.json")))?;
                        }
                    }
                    Ok(record)
                };
                // A crashing seed is recorded as failed; siblings keep going.
                let guarded = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run));
                let record = match guarded {
                    Ok(Ok(record)) => Ok(record),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(panic) => Err(match panic.downcast_ref::<&str>() {
                        Some(s) => format!("panic: {s}"),
                        None => match panic.downcast_ref::<String>() {
                            Some(s) => format!("panic: {s}"),
                            None => "panic".to_string(),
                        },
                    }),
                };
                SeedOutcome { seed, record }
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut columns = String::new();
    for outcome in &outcomes {
        match &outcome.record {
            Ok(record) => {
                if columns.is_empty() {
                    columns = record.header();
                }
            }
            Err(msg) => failures.push((outcome.seed, msg.clone())),
        }
    }

    let metric_name = outcomes
        .iter()
        .find_map(|o| o.record.as_ref().ok().map(|r| r.metric_name.clone()))
        .unwrap_or_else(|| "best_so_far".into());
    let meta = RunMetadata {
        config: cfg.clone(),
        config_hash: cfg.config_hash(),
        metric_name,
        columns,
        git_describe,
        failures,
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(outcomes)
}

/// Recognized sweep axes.
pub const SWEEP_AXES: &[&str] = &[
    "wishart_scale",
    "prior_scale",
    "learning_rate",
    "weight_decay",
    "width",
    "depth",
    "patience",
    "noise_std",
    "reinit_period",
    "reinit_threshold",
    "reinit_window_ratio",
];

/// Apply one axis value to a config copy.
pub fn apply_axis(cfg: &ExperimentConfig, axis: &str, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        "wishart_scale" => c.surrogate.wishart_scale = value,
        "prior_scale" => c.surrogate.prior_scale = value,
        "learning_rate" => c.surrogate.learning_rate = value,
        "weight_decay" => c.surrogate.weight_decay = value,
        "width" => c.surrogate.width = value as usize,
        "depth" => c.surrogate.depth = value as usize,
        "patience" => c.surrogate.patience = value as usize,
        "noise_std" => c.problem_options.noise_std = value,
        "reinit_period" => c.reinit.period = Some(value as usize),
        "reinit_threshold" => c.reinit.threshold = Some(value),
        "reinit_window_ratio" => c.reinit.window_ratio = Some(value),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown sweep axis `{other}` (expected one of {SWEEP_AXES:?})"
            )))
        }
    }
    c.validate()?;
    Ok(c)
}

/// Expand the template across `values x seeds` and run each point. Record
/// files land in `<out>/<name>/<axis>=<value>/seed_<s>.csv`.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: &str,
    values: &[f64],
    out_dir: &Path,
    jobs: usize,
    git_describe: Option<String>,
) -> Result<Vec<(f64, Vec<SeedOutcome>)>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let base = cfg.experiment_name();
    let mut all = Vec::new();
    for &v in values {
        let mut point = apply_axis(cfg, axis, v)?;
        point.name = Some(format!("{base}/{axis}={v}"));
        let outcomes = run_experiment(&point, out_dir, jobs, git_describe.clone())?;
        all.push((v, outcomes));
    }
    Ok(all)
}

/// Exported metric kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportMetric {
    Best,
    Hv,
    LogDiffHv,
}

impl ExportMetric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "best" => Ok(ExportMetric::Best),
            "hv" => Ok(ExportMetric::Hv),
            "logdiff_hv" => Ok(ExportMetric::LogDiffHv),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// Linear-interpolation percentile of already-sorted values.
fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

const LOGDIFF_CLAMP: f64 = 1e-12;

/// Per-iteration mean and 10/90-percentile bands across seeds. For
/// `logdiff_hv` the series is `ln(max_hv - hv_so_far)` clamped at
/// `ln(1e-12)`.
pub fn export_curves(
    records: &[RunRecord],
    metric: ExportMetric,
    max_hv: Option<f64>,
) -> Result<String> {
    if records.is_empty() {
        return Err(Error::MalformedRecord("no records to export".into()));
    }
    let len = records[0].rows.len();
    for r in records {
        if r.rows.len() != len {
            return Err(Error::MalformedRecord("records have differing lengths".into()));
        }
        match metric {
            ExportMetric::Best if r.metric_name != "best_so_far" => {
                return Err(Error::MalformedRecord("metric `best` needs single-objective records".into()))
            }
            ExportMetric::Hv | ExportMetric::LogDiffHv if r.metric_name != "hv_so_far" => {
                return Err(Error::MalformedRecord("hypervolume metrics need multi-objective records".into()))
            }
            _ => {}
        }
    }
    let max_hv = match metric {
        ExportMetric::LogDiffHv => Some(max_hv.ok_or(Error::MissingMaxHv)?),
        _ => max_hv,
    };

    let mut out = String::from("t,mean,p10,p90\n");
    for i in 0..len {
        let t = records[0].rows[i].t;
        let mut vals: Vec<f64> = records
            .iter()
            .map(|r| {
                let m = r.rows[i].metric;
                match metric {
                    ExportMetric::LogDiffHv => (max_hv.unwrap() - m).max(LOGDIFF_CLAMP).ln(),
                    _ => m,
                }
            })
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let p10 = percentile_sorted(&vals, 10.0);
        let p90 = percentile_sorted(&vals, 90.0);
        let _ = writeln!(out, "{t},{mean},{p10},{p90}");
    }
    Ok(out)
}

/// Read every `seed_*.csv` under a directory.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("seed_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::MalformedRecord(format!("no record files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| RunRecord::parse_delimited(&std::fs::read_to_string(p)?))
        .collect()
}
