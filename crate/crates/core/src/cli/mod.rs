//! Command-line layer: configuration, subcommands and CSV output.
//!
//! Every subcommand loads an [`ExperimentConfig`] (defaults, then
//! `--config`, then individual flags), validates it, and writes one CSV.
//! Invariant violations are reported on stderr and turn into a nonzero
//! exit status after the CSV has been written.

pub mod commands;
pub mod config;

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_bound, cmd_ingest, cmd_learn, cmd_sweep_cache_size, cmd_sweep_threshold, cmd_validate_sir, Report, Table,
};
pub use config::{ExperimentConfig, Generator, Instance};

#[derive(Debug, Parser)]
#[command(name = "recache", version, about = "Joint caching and recommendation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the CSV to this file instead of the output directory or stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Compare the closed-form offload probability with PPP simulation.
    ValidateSir,
    /// Objective of the greedy policy and the baselines versus cache size.
    SweepCacheSize,
    /// Objective versus the upper end of the threshold distribution.
    SweepThreshold,
    /// Per-slot trace of epsilon-greedy threshold learning.
    Learn,
    /// Per-user convergence bound against measured convergence slots.
    Bound,
    /// Estimate preferences and activity from a play-count log.
    Ingest,
    /// Print the effective configuration as TOML.
    PrintConfig,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub antennas: Option<u32>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// SIR threshold in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub gamma_db: Option<f64>,
    #[arg(long, global = true)]
    pub users: Option<usize>,
    #[arg(long, global = true)]
    pub contents: Option<usize>,
    #[arg(long, global = true)]
    pub cache_size: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub cache_sizes: Option<Vec<usize>>,
    #[arg(long, global = true)]
    pub list_size: Option<usize>,
    #[arg(long, global = true)]
    pub theta_max: Option<f64>,
    #[arg(long, global = true)]
    pub threshold_seed: Option<u64>,
    /// Play-count log (`user,content,count` or tab separated).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_generator)]
    pub generator: Option<Generator>,
    #[arg(long, global = true)]
    pub zipf_exponent: Option<f64>,
    #[arg(long, global = true)]
    pub concentration: Option<f64>,
    #[arg(long, global = true)]
    pub personalization: Option<f64>,
    /// Comma-separated epsilon schedules, e.g. `0,0.1,1/t`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub schedules: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub slots: Option<usize>,
    #[arg(long, global = true)]
    pub requests_per_slot: Option<usize>,
    #[arg(long, global = true)]
    pub bound_epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[arg(long, global = true)]
    pub max_slots: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub caching_probs: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub drops: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub theta_points: Option<usize>,
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    match s {
        "zipf" => Ok(Generator::Zipf),
        "softmax" => Ok(Generator::Softmax),
        other => Err(format!("unknown generator {other:?} (expected zipf or softmax)")),
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut cfg.seed, &self.seed);
        if self.out_dir.is_some() {
            cfg.out_dir = self.out_dir.clone();
        }
        set(&mut cfg.network.lambda, &self.lambda);
        set(&mut cfg.network.n_antennas, &self.antennas);
        set(&mut cfg.network.pathloss_alpha, &self.alpha);
        set(&mut cfg.network.sir_threshold_db, &self.gamma_db);
        set(&mut cfg.sizes.n_users, &self.users);
        set(&mut cfg.sizes.n_contents, &self.contents);
        set(&mut cfg.sizes.cache_size, &self.cache_size);
        set(&mut cfg.sizes.cache_sizes, &self.cache_sizes);
        set(&mut cfg.sizes.list_size, &self.list_size);
        if self.theta_max.is_some() {
            cfg.thresholds.theta_max = self.theta_max;
        }
        if self.threshold_seed.is_some() {
            cfg.thresholds.seed = self.threshold_seed;
        }
        if self.dataset.is_some() {
            cfg.dataset.path = self.dataset.clone();
        }
        set(&mut cfg.dataset.generator, &self.generator);
        set(&mut cfg.dataset.zipf_exponent, &self.zipf_exponent);
        set(&mut cfg.dataset.concentration, &self.concentration);
        set(&mut cfg.dataset.personalization, &self.personalization);
        set(&mut cfg.learner.schedules, &self.schedules);
        set(&mut cfg.learner.n_slots, &self.slots);
        set(&mut cfg.learner.requests_per_slot, &self.requests_per_slot);
        set(&mut cfg.learner.bound_epsilon, &self.bound_epsilon);
        set(&mut cfg.learner.bound_runs, &self.runs);
        set(&mut cfg.learner.bound_max_slots, &self.max_slots);
        set(&mut cfg.validation.caching_probs, &self.caching_probs);
        set(&mut cfg.validation.n_drops, &self.drops);
        set(&mut cfg.solver.tol, &self.tol);
        set(&mut cfg.solver.theta_points, &self.theta_points);
    }
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn effective_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_path(p)?,
            None => ExperimentConfig::default(),
        };
        self.overrides.apply(&mut cfg);
        // ingest only reads the dataset and the two size fields
        if self.command != Command::Ingest {
            cfg.validate()?;
        }
        Ok(cfg)
    }
}

pub fn run_command(command: Command, cfg: &ExperimentConfig) -> crate::Result<Report> {
    match command {
        Command::ValidateSir => cmd_validate_sir(cfg),
        Command::SweepCacheSize => cmd_sweep_cache_size(cfg),
        Command::SweepThreshold => cmd_sweep_threshold(cfg),
        Command::Learn => cmd_learn(cfg),
        Command::Bound => cmd_bound(cfg),
        Command::Ingest => cmd_ingest(cfg),
        Command::PrintConfig => unreachable!("handled by run"),
    }
}

/// Runs the parsed command line. Returns `Ok(false)` when the output was
/// produced but an invariant check failed.
pub fn run(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = cli.effective_config()?;
    if cli.command == Command::PrintConfig {
        print!("{}", cfg.to_toml()?);
        return Ok(true);
    }
    let report = run_command(cli.command, &cfg)?;
    let target = match (&cli.out, &cfg.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            Some(dir.join(format!("{}.csv", report.name)))
        }
        (None, None) => None,
    };
    match target {
        Some(path) => {
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            report.table.write_csv(BufWriter::new(f))?;
            eprintln!("wrote {}", path.display());
        }
        None => report.table.write_csv(io::stdout().lock())?,
    }
    for v in &report.violations {
        eprintln!("invariant violated: {v}");
    }
    Ok(report.violations.is_empty())
}
