//! Monte Carlo drops of a Poisson base-station network around a user at
//! the origin, used to check the closed-form offload success probability.
//!
//! Each base station caches the content independently with probability
//! `c`. The user is served by the nearest caching station over a Rayleigh
//! link (`h ~ Exp(1)`); every other station interferes with gain
//! `g ~ Gamma(N_t, 1/N_t)`. A drop succeeds when
//! `h r^-a / (N_t I) >= gamma0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sgeom::NetworkParams;

/// Largest tolerated probability that the window holds no caching station.
pub const MAX_EMPTY_WINDOW_PROB: f64 = 1e-6;

/// Window radius for a caching probability: `15 / sqrt(lambda pi max(c, 0.05))`,
/// widened when needed so the window almost surely holds a caching station.
pub fn default_radius(lambda: f64, caching_prob: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = 15.0 / (lambda * pi * caching_prob.max(0.05)).sqrt();
    if caching_prob > 0.0 {
        let needed = ((1.0 / MAX_EMPTY_WINDOW_PROB).ln() / (caching_prob * lambda * pi)).sqrt();
        r.max(needed)
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropConfig {
    pub params: NetworkParams,
    pub caching_prob: f64,
    pub window_radius: f64,
    pub n_drops: usize,
    pub seed: u64,
}

impl DropConfig {
    /// Config with the window radius chosen by [`default_radius`].
    pub fn new(params: NetworkParams, caching_prob: f64, n_drops: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            params,
            caching_prob,
            window_radius: default_radius(params.lambda, caching_prob),
            n_drops,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(0.0..=1.0).contains(&self.caching_prob) {
            return Err(Error::InvalidInput(format!("caching probability {} outside [0, 1]", self.caching_prob)));
        }
        if !(self.window_radius > 0.0) {
            return Err(Error::InvalidInput("window radius must be positive".into()));
        }
        if self.n_drops == 0 {
            return Err(Error::InvalidInput("need at least one drop".into()));
        }
        if self.caching_prob > 0.0 {
            let mean = self.caching_prob * self.params.lambda * std::f64::consts::PI * self.window_radius.powi(2);
            if (-mean).exp() > MAX_EMPTY_WINDOW_PROB {
                return Err(Error::InvalidInput(format!(
                    "window radius {} too small: no caching station with probability {:e}",
                    self.window_radius,
                    (-mean).exp()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOutcome {
    pub successes: u64,
    pub failures: u64,
    pub probability: f64,
    pub std_error: f64,
}

impl DropOutcome {
    fn from_counts(successes: u64, failures: u64) -> Self {
        let n = (successes + failures) as f64;
        let p = successes as f64 / n;
        Self { successes, failures, probability: p, std_error: (p * (1.0 - p) / n).sqrt() }
    }
}

/// Uniform points of a homogeneous PPP of density `lambda` on the disk of
/// radius `radius` centered at the origin.
pub fn sample_ppp<R: Rng + ?Sized>(lambda: f64, radius: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let mean = lambda * std::f64::consts::PI * radius * radius;
    let n = poisson_count(mean, rng);
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            [r * phi.cos(), r * phi.sin()]
        })
        .collect()
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if !(mean > 0.0) {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive Poisson mean");
    let n: f64 = d.sample(rng);
    n as usize
}

fn drop_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn one_drop(cfg: &DropConfig, gain: &Gamma<f64>, rng: &mut ChaCha8Rng) -> bool {
    let p = &cfg.params;
    let mean = p.lambda * std::f64::consts::PI * cfg.window_radius.powi(2);
    let n = poisson_count(mean, rng);
    // Only distances matter for an isotropic model.
    let mut dist = Vec::with_capacity(n);
    let mut serving: Option<usize> = None;
    for i in 0..n {
        let r = cfg.window_radius * rng.random::<f64>().sqrt();
        let caches = rng.random::<f64>() < cfg.caching_prob;
        if caches && serving.is_none_or(|s| r < dist[s]) {
            serving = Some(i);
        }
        dist.push(r);
    }
    let Some(s) = serving else {
        return false;
    };
    let h: f64 = Exp1.sample(rng);
    let signal = h * dist[s].powf(-p.pathloss_alpha);
    let mut interference = 0.0;
    for (i, r) in dist.iter().enumerate() {
        if i != s {
            interference += gain.sample(rng) * r.powf(-p.pathloss_alpha);
        }
    }
    signal >= p.sir_threshold * p.n_antennas as f64 * interference
}

/// Empirical `P(SIR >= gamma0)` over `n_drops` independent drops. Drop `i`
/// uses its own random stream derived from `(seed, i)`.
pub fn simulate_offload(cfg: &DropConfig) -> Result<DropOutcome> {
    cfg.validate()?;
    if cfg.caching_prob == 0.0 {
        return Ok(DropOutcome::from_counts(0, cfg.n_drops as u64));
    }
    let nt = cfg.params.n_antennas as f64;
    let gain = Gamma::new(nt, 1.0 / nt).map_err(|e| Error::Domain(e.to_string()))?;
    let successes: u64 = (0..cfg.n_drops as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = drop_rng(cfg.seed, i);
            one_drop(cfg, &gain, &mut rng) as u64
        })
        .sum();
    Ok(DropOutcome::from_counts(successes, cfg.n_drops as u64 - successes))
}
