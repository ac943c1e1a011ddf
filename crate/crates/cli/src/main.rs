use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semmac::harness::{self, ExperimentConfig, HarnessError, MatrixSource, PRESETS};
use semmac::objective::Alpha;
use semmac::trainer::Variant;

#[derive(Parser)]
#[command(name = "semmac", version, about = "Semantic-aware multiple access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every (seed, variant) pair, writing CSVs and a summary.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print optimal allocations.
    Oracle {
        #[command(flatten)]
        source: Source,
        /// Comma-separated fairness levels; `inf` selects max-min.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<Alpha>,
        #[arg(long)]
        channels: Option<usize>,
        /// Simplex grid step for single-channel searches.
        #[arg(long)]
        step: Option<f64>,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Check a config file and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List the built-in scenarios, or print one as a config file.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(short, long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(short, long)]
    preset: Option<String>,
    /// Association matrix file replacing the config's matrix.
    #[arg(long)]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    alpha: Option<Alpha>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seeds")]
    seed_count: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    variants: Vec<Variant>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tail: Option<usize>,
}

fn load(source: &Source) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => harness::preset(name)?,
        (None, None) => match &source.matrix {
            Some(_) => harness::preset("s1a").map(|mut c| {
                c.name = "custom".into();
                c
            })?,
            None => return Err(HarnessError::Config("give --config, --preset or --matrix".into())),
        },
    };
    if let Some(m) = &source.matrix {
        cfg.matrix = MatrixSource::File(m.clone());
        cfg.ues = None;
        cfg.segments = None;
    }
    Ok(cfg)
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
            cfg.tail = cfg.tail.min(h as usize + 1);
        }
        if let Some(c) = self.channels {
            cfg.channels = c;
        }
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(n) = self.seed_count {
            cfg.seeds = (0..n).collect();
        }
        if !self.variants.is_empty() {
            cfg.variants = self.variants.clone();
        }
        if self.window.is_some() {
            cfg.throughput_window = self.window;
        }
        if let Some(t) = self.tail {
            cfg.tail = t;
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { source, overrides, out } => {
            let mut cfg = load(&source)?;
            overrides.apply(&mut cfg);
            let summary = harness::run_experiment(&cfg, &out)?;
            if let Some(o) = &summary.oracle {
                println!("oracle  {o}");
            }
            for (variant, v) in &summary.variants {
                println!(
                    "{variant:<7} mean objective over last {} slots: {:.4} ({} seeds)",
                    cfg.tail,
                    v.mean_tail_objective,
                    v.seeds.len()
                );
            }
            println!("wrote {}", out.join(harness::SUMMARY_FILE).display());
        }
        Command::Oracle { source, alpha, channels, step, json } => {
            let mut cfg = load(&source)?;
            if let Some(c) = channels {
                cfg.channels = c;
            }
            if let Some(s) = step {
                cfg.oracle_grid_step = s;
            }
            let alphas = if alpha.is_empty() { vec![cfg.alpha] } else { alpha };
            let mut reports = Vec::new();
            for a in alphas {
                cfg.alpha = a;
                let r = harness::run_oracle(&cfg)?;
                if !json {
                    println!("{r}");
                }
                reports.push(r);
            }
            if json {
                let text = serde_json::to_string_pretty(&reports).map_err(|e| HarnessError::Config(e.to_string()))?;
                println!("{text}");
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            let m = cfg.matrix()?;
            eprintln!("ok: N={} K={} C={} alpha={}", m.ues(), m.segments(), cfg.channels, cfg.alpha);
            print!("{}", cfg.to_toml()?);
        }
        Command::Presets { name: Some(name) } => print!("{}", harness::preset(&name)?.to_toml()?),
        Command::Presets { name: None } => {
            for name in PRESETS {
                let cfg = harness::preset(name)?;
                let m = cfg.matrix()?;
                println!("{name}  N={} K={} C={}", m.ues(), m.segments(), cfg.channels);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
