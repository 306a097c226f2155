//! Experiment configuration in TOML. Unknown keys are rejected.
//!
//! ```toml
//! seed = 2019
//!
//! [network]
//! lambda = 1.0
//! n_antennas = 2
//! pathloss_alpha = 3.76
//! sir_threshold_db = -8.0
//!
//! [sizes]
//! n_users = 50
//! n_contents = 100
//! cache_size = 10
//! cache_sizes = [5, 10, 20, 40]
//! list_size = 5
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{estimate_from_log, top_k_filter, RequestLog, UserPopulation};
use crate::error::{Error, Result};
use crate::learner::EpsilonSchedule;
use crate::sgeom::{sir_constants, NetworkParams, SirConstants};
use crate::synth::{softmax_population, uniform_thresholds, zipf_population, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every random component derives its stream from it.
    pub seed: u64,
    /// Directory for CSV output. Standard output when absent.
    pub out_dir: Option<PathBuf>,
    pub network: NetworkSection,
    pub sizes: SizeSection,
    pub thresholds: ThresholdSection,
    pub dataset: DatasetSection,
    pub learner: LearnerSection,
    pub validation: ValidationSection,
    pub solver: SolverSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub lambda: f64,
    pub n_antennas: u32,
    pub pathloss_alpha: f64,
    pub sir_threshold_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SizeSection {
    pub n_users: usize,
    pub n_contents: usize,
    pub cache_size: usize,
    pub cache_sizes: Vec<usize>,
    pub list_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    /// Upper end of the uniform threshold draw; `4 / N_f` when absent.
    pub theta_max: Option<f64>,
    /// Explicit per-user thresholds, overriding the random draw.
    pub values: Option<Vec<f64>>,
    /// Seed of the threshold draw; the master seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Zipf,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Play-count log (`user<sep>content<sep>count`). A synthetic instance
    /// is generated when absent.
    pub path: Option<PathBuf>,
    pub generator: Generator,
    pub zipf_exponent: f64,
    pub concentration: f64,
    pub personalization: f64,
    pub feature_dim: usize,
    pub feature_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    /// Schedules for `learn`: a number in [0, 1] or `1/t`.
    pub schedules: Vec<String>,
    pub n_slots: usize,
    pub requests_per_slot: usize,
    /// Constant epsilon used by `bound`.
    pub bound_epsilon: f64,
    pub bound_runs: usize,
    pub bound_max_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSection {
    pub caching_probs: Vec<f64>,
    pub n_drops: usize,
    /// Extra rows at `c = 1` for each listed threshold (dB).
    pub sir_thresholds_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    /// Number of points of the log-spaced `theta_max` grid.
    pub theta_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2019,
            out_dir: None,
            network: NetworkSection::default(),
            sizes: SizeSection::default(),
            thresholds: ThresholdSection::default(),
            dataset: DatasetSection::default(),
            learner: LearnerSection::default(),
            validation: ValidationSection::default(),
            solver: SolverSection::default(),
        }
    }
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { lambda: 1.0, n_antennas: 2, pathloss_alpha: 3.76, sir_threshold_db: -8.0 }
    }
}

impl Default for SizeSection {
    fn default() -> Self {
        Self { n_users: 50, n_contents: 100, cache_size: 10, cache_sizes: vec![5, 10, 20, 40], list_size: 5 }
    }
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            path: None,
            generator: Generator::Zipf,
            zipf_exponent: 0.8,
            concentration: 20.0,
            personalization: 0.7,
            feature_dim: 8,
            feature_scale: 1.0,
        }
    }
}

impl Default for LearnerSection {
    fn default() -> Self {
        Self {
            schedules: ["0", "0.01", "0.1", "1/t"].map(String::from).to_vec(),
            n_slots: 200,
            requests_per_slot: 200,
            bound_epsilon: 0.1,
            bound_runs: 10,
            bound_max_slots: 2_000,
        }
    }
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            caching_probs: (0..=10).map(|i| i as f64 / 10.0).collect(),
            n_drops: 100_000,
            sir_thresholds_db: Vec::new(),
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tol: 1e-9, theta_points: 12 }
    }
}

/// A population with ground-truth thresholds plus the radio constants.
#[derive(Debug, Clone)]
pub struct Instance {
    pub population: UserPopulation,
    pub constants: SirConstants,
    pub params: NetworkParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("config serialization: {e}")))
    }

    pub fn network_params(&self) -> Result<NetworkParams> {
        let n = &self.network;
        NetworkParams::with_threshold_db(n.lambda, n.n_antennas, n.pathloss_alpha, n.sir_threshold_db)
    }

    pub fn schedules(&self) -> Result<Vec<EpsilonSchedule>> {
        self.learner.schedules.iter().map(|s| s.parse()).collect()
    }

    pub fn theta_max(&self) -> f64 {
        self.thresholds.theta_max.unwrap_or(4.0 / self.sizes.n_contents as f64)
    }

    /// Checks every field before any computation runs.
    pub fn validate(&self) -> Result<()> {
        self.network_params()?;
        let s = &self.sizes;
        if s.n_users == 0 || s.n_contents == 0 {
            return Err(Error::InvalidInput("n_users and n_contents must be at least 1".into()));
        }
        if s.list_size == 0 || s.list_size > s.n_contents {
            return Err(Error::InvalidInput(format!("list_size must lie in [1, n_contents], got {}", s.list_size)));
        }
        if s.cache_sizes.is_empty() {
            return Err(Error::InvalidInput("cache_sizes must not be empty".into()));
        }
        let t = &self.thresholds;
        if let Some(m) = t.theta_max {
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::InvalidInput(format!("theta_max must lie in [0, 1], got {m}")));
            }
        }
        if let Some(v) = &t.values {
            if v.len() != s.n_users {
                return Err(Error::InvalidInput(format!("{} threshold values for {} users", v.len(), s.n_users)));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidInput("threshold values must lie in [0, 1]".into()));
            }
        }
        let d = &self.dataset;
        if !(d.zipf_exponent >= 0.0) || !(d.concentration > 0.0) || !(0.0..=1.0).contains(&d.personalization) {
            return Err(Error::InvalidInput(
                "need zipf_exponent >= 0, concentration > 0 and personalization in [0, 1]".into(),
            ));
        }
        if d.generator == Generator::Softmax && (d.feature_dim == 0 || !(d.feature_scale > 0.0)) {
            return Err(Error::InvalidInput("softmax generator needs feature_dim >= 1 and feature_scale > 0".into()));
        }
        let l = &self.learner;
        self.schedules()?;
        if l.n_slots == 0 || l.requests_per_slot == 0 || l.bound_runs == 0 || l.bound_max_slots == 0 {
            return Err(Error::InvalidInput("learner slot, request and run counts must be positive".into()));
        }
        if !(l.bound_epsilon > 0.0 && l.bound_epsilon <= 1.0) {
            return Err(Error::InvalidInput(format!("bound_epsilon must lie in (0, 1], got {}", l.bound_epsilon)));
        }
        let v = &self.validation;
        if v.caching_probs.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidInput("caching_probs must lie in [0, 1]".into()));
        }
        if v.n_drops == 0 {
            return Err(Error::InvalidInput("n_drops must be positive".into()));
        }
        for db in &v.sir_thresholds_db {
            NetworkParams::with_threshold_db(self.network.lambda, self.network.n_antennas, self.network.pathloss_alpha, *db)?;
        }
        if !(self.solver.tol > 0.0) || self.solver.theta_points < 2 {
            return Err(Error::InvalidInput("solver tol must be positive and theta_points >= 2".into()));
        }
        Ok(())
    }

    /// Preferences and activity without thresholds, from the log when one
    /// is configured and from the synthetic generator otherwise.
    pub fn base_population(&self) -> Result<UserPopulation> {
        let s = &self.sizes;
        let d = &self.dataset;
        if let Some(path) = &d.path {
            let log = RequestLog::from_path(path)?;
            let filtered = top_k_filter(&log, s.n_users, s.n_contents)?;
            return Ok(estimate_from_log(&filtered)?.population);
        }
        match d.generator {
            Generator::Zipf => zipf_population(&SynthSpec {
                n_users: s.n_users,
                n_contents: s.n_contents,
                zipf_exponent: d.zipf_exponent,
                concentration: d.concentration,
                personalization: d.personalization,
                seed: self.seed,
            }),
            Generator::Softmax => {
                softmax_population(s.n_users, s.n_contents, d.feature_dim, d.feature_scale, self.seed).map(|(p, _)| p)
            }
        }
    }

    /// Thresholds for a given `theta_max`. Draws for different `theta_max`
    /// share their uniform variates, so thresholds scale proportionally.
    pub fn thresholds_for(&self, n_users: usize, theta_max: f64) -> Vec<f64> {
        if let Some(v) = &self.thresholds.values {
            return v.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.thresholds.seed.unwrap_or(self.seed));
        rng.set_stream(7);
        uniform_thresholds(n_users, theta_max, &mut rng)
    }

    pub fn instance(&self) -> Result<Instance> {
        self.validate()?;
        let base = self.base_population()?;
        let theta = self.thresholds_for(base.n_users(), self.theta_max());
        let population = base.with_thresholds(theta)?;
        let params = self.network_params()?;
        Ok(Instance { population, constants: sir_constants(&params)?, params })
    }
}
