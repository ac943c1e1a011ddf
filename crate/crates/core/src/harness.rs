//! Experiment configuration, scenario presets, multi-seed execution and
//! oracle reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{AssociationMatrix, EnvConfig, EnvError, TrajectoryWriter, UeThroughput, TRAJECTORY_SCHEMA_VERSION};
use crate::objective::{Alpha, AlphaFairness};
use crate::oracle::{self, OracleError, MAX_PERIOD, MAX_SCHEDULE_BITS};
use crate::trainer::{self, Hyperparameters, RunConfig, RunResult, TrainError, Variant};

pub const PRESETS: [&str; 5] = ["s1a", "s1b", "s2a", "s2b", "s2c"];
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown preset '{0}' (available: s1a, s1b, s2a, s2b, s2c)")]
    UnknownPreset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("run failed for seed {seed}, variant {variant}: {source}")]
    Run { seed: u64, variant: Variant, source: TrainError },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl HarnessError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::UnknownPreset(_) | HarnessError::Config(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Run { .. } => 4,
            HarnessError::Oracle(_) => 5,
        }
    }

    fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io { context: context.into(), source }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Io(msg) => HarnessError::Io { context: "I/O".into(), source: std::io::Error::other(msg) },
            other => HarnessError::Config(other.to_string()),
        }
    }
}

/// Where the association matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Preset(String),
    Inline(AssociationMatrix),
    /// Text matrix file; relative paths resolve against the config file.
    File(PathBuf),
}

fn default_horizon() -> u64 {
    10_000
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

fn default_tail() -> usize {
    1000
}

fn default_grid_step() -> f64 {
    0.01
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Number of UEs; checked against the matrix when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ues: Option<usize>,
    pub channels: usize,
    /// Number of segments; checked against the matrix when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    pub alpha: Alpha,
    pub matrix: MatrixSource,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Sliding throughput window in slots; absent means the whole horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_window: Option<usize>,
    /// Slots averaged at the end of each run for the summary.
    #[serde(default = "default_tail")]
    pub tail: usize,
    #[serde(default = "default_grid_step")]
    pub oracle_grid_step: f64,
    #[serde(default)]
    pub hyper: Hyperparameters,
}

fn matrix_of(rows: &[&[u8]]) -> AssociationMatrix {
    AssociationMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).expect("preset matrices are valid")
}

/// The embedded association matrix of a preset.
pub fn preset_matrix(name: &str) -> Result<AssociationMatrix, HarnessError> {
    let m = match name {
        "s1a" => matrix_of(&[&[1, 1, 0, 0, 0], &[1, 0, 1, 0, 0], &[0, 0, 0, 1, 0], &[0, 0, 0, 0, 1]]),
        "s1b" => matrix_of(&[&[1, 1, 0, 0], &[1, 1, 0, 0], &[0, 0, 1, 1], &[0, 0, 1, 1]]),
        // Sparse: six private segments, UEs 1 and 2 share one more.
        "s2a" => matrix_of(&[
            &[1, 0, 0, 0, 0, 0, 1],
            &[0, 1, 0, 0, 0, 0, 1],
            &[0, 0, 1, 0, 0, 0, 0],
            &[0, 0, 0, 1, 0, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0],
            &[0, 0, 0, 0, 0, 1, 0],
        ]),
        // Dense: pairs (1,2), (3,4), (5,6) share two segments each, plus privates.
        "s2b" => matrix_of(&[
            &[1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0],
            &[0, 1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0],
            &[0, 0, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0],
            &[0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0],
            &[0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1],
            &[0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1],
        ]),
        // Intermediate: privates plus one shared segment per pair.
        "s2c" => matrix_of(&[
            &[1, 0, 0, 0, 0, 0, 1, 0, 0],
            &[0, 1, 0, 0, 0, 0, 1, 0, 0],
            &[0, 0, 1, 0, 0, 0, 0, 1, 0],
            &[0, 0, 0, 1, 0, 0, 0, 1, 0],
            &[0, 0, 0, 0, 1, 0, 0, 0, 1],
            &[0, 0, 0, 0, 0, 1, 0, 0, 1],
        ]),
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    };
    Ok(m)
}

/// Preset experiment with default training settings.
pub fn preset(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let m = preset_matrix(name)?;
    let channels = if name.starts_with("s1") { 1 } else { 3 };
    Ok(ExperimentConfig {
        name: name.to_string(),
        ues: Some(m.ues()),
        channels,
        segments: Some(m.segments()),
        horizon: default_horizon(),
        alpha: Alpha::Finite(1.0),
        matrix: MatrixSource::Preset(name.to_string()),
        variants: default_variants(),
        seeds: default_seeds(),
        throughput_window: None,
        tail: default_tail(),
        oracle_grid_step: default_grid_step(),
        hyper: Hyperparameters::default(),
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; a relative matrix file path is resolved against
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let MatrixSource::File(f) = &mut cfg.matrix {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn fairness(&self) -> AlphaFairness {
        AlphaFairness::new(self.alpha)
    }

    pub fn matrix(&self) -> Result<AssociationMatrix, HarnessError> {
        match &self.matrix {
            MatrixSource::Preset(name) => preset_matrix(name),
            MatrixSource::Inline(m) => Ok(m.clone()),
            MatrixSource::File(path) => Ok(AssociationMatrix::load(path)?),
        }
    }

    pub fn env_config(&self) -> Result<EnvConfig, HarnessError> {
        Ok(EnvConfig { channels: self.channels, matrix: self.matrix()?, throughput_window: self.throughput_window })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let m = self.matrix()?;
        if self.channels == 0 {
            return Err(HarnessError::Config("channels must be >= 1".into()));
        }
        if let Some(n) = self.ues.filter(|&n| n != m.ues()) {
            return Err(HarnessError::Config(format!("ues = {n} but the matrix has {} rows", m.ues())));
        }
        if let Some(k) = self.segments.filter(|&k| k != m.segments()) {
            return Err(HarnessError::Config(format!("segments = {k} but the matrix has {} columns", m.segments())));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.variants.is_empty() {
            return Err(HarnessError::Config("variants must not be empty".into()));
        }
        if self.tail == 0 || self.tail as u64 > self.horizon + 1 {
            return Err(HarnessError::Config(format!("tail must be in 1..={}", self.horizon + 1)));
        }
        if !(self.oracle_grid_step > 0.0 && self.oracle_grid_step <= 1.0) {
            return Err(HarnessError::Config("oracle_grid_step must be in (0, 1]".into()));
        }
        self.fairness().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.hyper.validate().map_err(HarnessError::Config)?;
        self.env_config()?.validate()?;
        Ok(())
    }

    pub fn run_config(&self, variant: Variant) -> Result<RunConfig, HarnessError> {
        Ok(RunConfig {
            env: self.env_config()?,
            fairness: self.fairness(),
            variant,
            horizon: self.horizon,
            hyper: self.hyper.clone(),
        })
    }

    /// Short label used in output file names.
    pub fn label(&self) -> &str {
        if self.name.is_empty() {
            "experiment"
        } else {
            &self.name
        }
    }
}

/// The best achievable objective for a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub alpha: Alpha,
    /// `time_share` for single-channel closed form, `schedule` for brute force.
    pub method: String,
    /// Per-UE transmit fractions.
    pub share: Vec<f64>,
    pub self_throughputs: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub objective: f64,
    /// Schedule period when `method` is `schedule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={:<5} p={} self={} x={} objective={:.4}",
            self.alpha.to_string(),
            fmt_vec(&self.share),
            fmt_vec(&self.self_throughputs),
            fmt_vec(&self.throughputs),
            self.objective
        )?;
        if let Some(p) = self.period {
            write!(f, " (period {p} schedule)")?;
        }
        Ok(())
    }
}

/// Optimum for `matrix` on `channels` channels: the stationary grid search
/// when there is one channel, otherwise the longest brute-force schedule
/// period within budget.
pub fn oracle_report(
    matrix: &AssociationMatrix,
    channels: usize,
    fairness: &AlphaFairness,
    grid_step: f64,
) -> Result<OracleReport, HarnessError> {
    if channels == 1 && matrix.is_static() {
        let opt = oracle::optimal_time_share(matrix, fairness, grid_step)?;
        return Ok(OracleReport {
            alpha: fairness.alpha,
            method: "time_share".into(),
            share: opt.share.0,
            self_throughputs: opt.self_throughputs,
            throughputs: opt.throughputs,
            objective: opt.objective,
            period: None,
        });
    }
    let per_slot = oracle::schedule_bits(matrix.ues(), channels, 1);
    let period = ((MAX_SCHEDULE_BITS / per_slot).floor() as usize).min(MAX_PERIOD);
    if period == 0 {
        return Err(OracleError::Budget(format!(
            "a single slot of N={} UEs on C={channels} channels already exceeds the enumeration budget",
            matrix.ues()
        ))
        .into());
    }
    let opt = oracle::brute_force_schedule(matrix, channels, period, fairness)?;
    let mut share = vec![0.0; matrix.ues()];
    for slot in &opt.schedule {
        for (i, a) in slot.0.iter().enumerate() {
            if a.mode == crate::env::Mode::Transmit {
                share[i] += 1.0 / period as f64;
            }
        }
    }
    Ok(OracleReport {
        alpha: fairness.alpha,
        method: "schedule".into(),
        share,
        self_throughputs: opt.self_throughputs,
        throughputs: opt.throughputs,
        objective: opt.objective,
        period: Some(period),
    })
}

pub fn run_oracle(config: &ExperimentConfig) -> Result<OracleReport, HarnessError> {
    config.validate()?;
    oracle_report(&config.matrix()?, config.channels, &config.fairness(), config.oracle_grid_step)
}

/// Scalars of one (seed, variant) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub tail_objective: f64,
    pub tail_own_objective: f64,
    pub all_time: Vec<UeThroughput>,
    pub final_epsilon: f64,
    pub train_steps: u64,
    pub wall_clock_secs: f64,
    pub csv: String,
}

/// Seed-averaged results of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub mean_tail_objective: f64,
    pub mean_tail_own_objective: f64,
    /// Per-UE all-time throughputs averaged over seeds.
    pub mean_all_time: Vec<UeThroughput>,
    pub seeds: Vec<SeedSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub oracle: Option<OracleReport>,
    /// Why no oracle value is available, if so.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_note: Option<String>,
    pub variants: BTreeMap<Variant, VariantSummary>,
}

fn csv_name(config: &ExperimentConfig, variant: Variant, seed: u64) -> String {
    format!("{}_{}_seed{}.csv", config.label(), variant, seed)
}

fn summarize(config: &ExperimentConfig, runs: &[(RunResult, String)]) -> Result<VariantSummary, TrainError> {
    let fairness = config.fairness();
    let mut seeds = Vec::with_capacity(runs.len());
    for (r, csv) in runs {
        let e = trainer::evaluate(r, &fairness, config.tail)?;
        seeds.push(SeedSummary {
            seed: r.seed,
            tail_objective: e.tail_objective,
            tail_own_objective: e.tail_own_objective,
            all_time: e.all_time,
            final_epsilon: r.final_epsilon,
            train_steps: r.train_steps,
            wall_clock_secs: r.wall_clock_secs,
            csv: csv.clone(),
        });
    }
    let k = seeds.len() as f64;
    let n = seeds[0].all_time.len();
    let mean_all_time = (0..n)
        .map(|i| UeThroughput {
            x: seeds.iter().map(|s| s.all_time[i].x).sum::<f64>() / k,
            self_x: seeds.iter().map(|s| s.all_time[i].self_x).sum::<f64>() / k,
            assisted_x: seeds.iter().map(|s| s.all_time[i].assisted_x).sum::<f64>() / k,
        })
        .collect();
    Ok(VariantSummary {
        mean_tail_objective: seeds.iter().map(|s| s.tail_objective).sum::<f64>() / k,
        mean_tail_own_objective: seeds.iter().map(|s| s.tail_own_objective).sum::<f64>() / k,
        mean_all_time,
        seeds,
    })
}

fn run_one(config: &ExperimentConfig, variant: Variant, seed: u64, dir: &Path) -> Result<(RunResult, String), HarnessError> {
    let name = csv_name(config, variant, seed);
    let path = dir.join(&name);
    let file = File::create(&path).map_err(|e| HarnessError::io(format!("creating {}", path.display()), e))?;
    let mut writer = TrajectoryWriter::new(BufWriter::new(file), true)?;
    let run_cfg = config.run_config(variant)?;
    let result = trainer::run_recorded(&run_cfg, seed, Some(&mut writer))
        .map_err(|source| HarnessError::Run { seed, variant, source })?;
    writer.finish()?;
    Ok((result, name))
}

/// Runs every (seed, variant) pair, writes one trajectory CSV per run and a
/// seed-averaged summary. The summary is written only if every run succeeds.
pub fn run_experiment(config: &ExperimentConfig, output_dir: &Path) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| HarnessError::io(format!("creating {}", output_dir.display()), e))?;
    let probe = output_dir.join(".write-probe");
    File::create(&probe).map_err(|e| HarnessError::io(format!("writing into {}", output_dir.display()), e))?;
    let _ = fs::remove_file(&probe);

    let (oracle, oracle_note) = match oracle_report(&config.matrix()?, config.channels, &config.fairness(), config.oracle_grid_step) {
        Ok(r) => (Some(r), None),
        Err(HarnessError::Oracle(e)) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let jobs: Vec<(Variant, u64)> =
        config.variants.iter().flat_map(|&v| config.seeds.iter().map(move |&s| (v, s))).collect();
    let results: Vec<(Variant, (RunResult, String))> = jobs
        .par_iter()
        .map(|&(v, s)| run_one(config, v, s, output_dir).map(|r| (v, r)))
        .collect::<Result<_, _>>()?;

    let mut variants = BTreeMap::new();
    for &v in &config.variants {
        let runs: Vec<(RunResult, String)> =
            results.iter().filter(|(rv, _)| *rv == v).map(|(_, r)| r.clone()).collect();
        let summary = summarize(config, &runs).map_err(|source| HarnessError::Run { seed: runs[0].0.seed, variant: v, source })?;
        variants.insert(v, summary);
    }
    let summary = ExperimentSummary {
        schema_version: TRAJECTORY_SCHEMA_VERSION,
        config: config.clone(),
        oracle,
        oracle_note,
        variants,
    };
    let path = output_dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    Ok(summary)
}
