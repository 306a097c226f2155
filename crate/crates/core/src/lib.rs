//! Joint probabilistic edge caching and personalized recommendation.
//!
//! Base stations cache content `f` independently with probability `c_f` and
//! show each user a short recommendation list. A per-user psychological
//! threshold decides which listed items the user is willing to consider,
//! which reshapes demand. The crate solves for the caching/recommendation
//! pair maximizing the probability that a request is served from a cache
//! with adequate SIR, learns unknown thresholds with an epsilon-greedy loop,
//! and validates the closed-form coverage expression with a Monte Carlo
//! Poisson-network simulator.
//!
//! Module map:
//! - [`catalog`]: play-count logs, inherent preferences, activity levels
//! - [`demand`]: candidate subsets and post-recommendation preferences
//! - [`sgeom`]: special functions and the closed-form offload probability
//! - [`cacheopt`]: optimal probabilistic caching for a fixed demand
//! - [`recopt`]: greedy joint recommendation/caching
//! - [`learner`]: epsilon-greedy threshold learning
//! - [`reqsim`]: generative request simulator
//! - [`baselines`]: comparison policies
//! - [`netsim`]: PPP drop simulator
//! - [`cli`]: experiment configuration and subcommands

pub mod baselines;
pub mod cacheopt;
pub mod catalog;
pub mod cli;
pub mod demand;
pub mod error;
pub mod learner;
pub mod netsim;
pub mod recopt;
pub mod reqsim;
pub mod sgeom;
pub mod synth;

pub use cacheopt::{optimal_caching, CachingPolicy};
pub use catalog::{Catalog, RequestLog, UserPopulation};
pub use demand::RecommendationPolicy;
pub use error::{Error, Result};
pub use recopt::{greedy_joint, JointPolicy};
pub use sgeom::{NetworkParams, SirConstants};

/// Absolute tolerance used for probability-vector normalization checks.
pub const NORM_TOL: f64 = 1e-9;

pub(crate) fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidInput(format!("{what}: sums to {s}, expected 1")));
    }
    Ok(())
}
