//! Optimal probabilistic caching for a fixed post-recommendation demand.
//!
//! The objective `sum_f pi_f c_f / (G1 c_f + G2)` is separable and concave,
//! so the KKT conditions give the truncated square-root allocation
//!
//! ```text
//! c_f(mu) = clamp01( sqrt(G2 pi_f) / (sqrt(mu) G1) - G2 / G1 )
//! ```
//!
//! with the multiplier `mu` in `(0, max_f pi_f / G2]` chosen so that the
//! cache budget is met.

use crate::error::{Error, Result};
use crate::sgeom::SirConstants;

/// Slack allowed on the cache budget.
pub const BUDGET_SLACK: f64 = 1e-6;

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CachingPolicy {
    probs: Vec<f64>,
    cache_size: usize,
}

impl CachingPolicy {
    pub fn new(probs: Vec<f64>, cache_size: usize) -> Result<Self> {
        if probs.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidInput("caching probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if total > cache_size as f64 + BUDGET_SLACK {
            return Err(Error::InvalidInput(format!(
                "caching probabilities sum to {total}, above cache size {cache_size}"
            )));
        }
        Ok(Self { probs, cache_size })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Result of one caching solve, with the bisection bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingSolve {
    pub policy: CachingPolicy,
    /// `None` when the budget constraint is not binding.
    pub multiplier: Option<f64>,
    pub iterations: usize,
    /// Upper end of the multiplier bracket, `max_f pi_f / G2`.
    pub delta0: f64,
}

#[inline]
fn allocation(pi: f64, mu: f64, k: &SirConstants) -> f64 {
    if pi <= 0.0 {
        return 0.0;
    }
    ((k.g2 * pi).sqrt() / (mu.sqrt() * k.g1) - k.g2 / k.g1).clamp(0.0, 1.0)
}

/// Allocation at a given multiplier.
pub fn allocation_at(mu: f64, popularity: &[f64], k: &SirConstants) -> Vec<f64> {
    popularity.iter().map(|&pi| allocation(pi, mu, k)).collect()
}

/// `sum_f c_f(mu) - N_c`; nonincreasing in `mu`.
pub fn multiplier_residual(mu: f64, popularity: &[f64], k: &SirConstants, cache_size: usize) -> f64 {
    popularity.iter().map(|&pi| allocation(pi, mu, k)).sum::<f64>() - cache_size as f64
}

/// Rounding error of [`multiplier_residual`] at `mu`. Each interior term
/// cancels `G2 / G1` against a quantity of similar size, so a tolerance
/// below this cannot be met in floating point.
fn residual_noise(mu: f64, popularity: &[f64], k: &SirConstants, cache_size: usize) -> f64 {
    let terms: f64 = popularity
        .iter()
        .filter(|&&pi| allocation(pi, mu, k) > 0.0)
        .map(|&pi| (k.g2 * pi).sqrt() / (mu.sqrt() * k.g1) + k.g2 / k.g1)
        .sum();
    4.0 * f64::EPSILON * (terms + cache_size as f64)
}

/// Multiplier that meets the budget exactly if every content counted as
/// interior is interior at the root.
fn multiplier_for_pattern(popularity: &[f64], k: &SirConstants, cache_size: usize, class: impl Fn(f64) -> Clamp) -> Option<f64> {
    let (mut n_full, mut n_int, mut s) = (0usize, 0usize, 0.0f64);
    for &pi in popularity.iter().filter(|&&pi| pi > 0.0) {
        match class(pi) {
            Clamp::Full => n_full += 1,
            Clamp::Interior => {
                n_int += 1;
                s += (k.g2 * pi).sqrt() / k.g1;
            }
            Clamp::Empty => {}
        }
    }
    let denom = cache_size as f64 - n_full as f64 + n_int as f64 * k.g2 / k.g1;
    (n_int > 0 && denom > 0.0).then(|| (s / denom).powi(2))
}

enum Clamp {
    Full,
    Interior,
    Empty,
}

fn classify(c_min: f64, c_max: f64) -> Clamp {
    if c_min >= 1.0 {
        Clamp::Full
    } else if c_max > 0.0 {
        Clamp::Interior
    } else {
        Clamp::Empty
    }
}

/// Maximizes `sum_f pi_f c_f / (G1 c_f + G2)` subject to
/// `sum_f c_f <= N_c`, `0 <= c_f <= 1`.
pub fn optimal_caching(popularity: &[f64], k: &SirConstants, cache_size: usize, tol: f64) -> Result<CachingPolicy> {
    solve_caching(popularity, k, cache_size, tol).map(|s| s.policy)
}

pub fn solve_caching(popularity: &[f64], k: &SirConstants, cache_size: usize, tol: f64) -> Result<CachingSolve> {
    let n_f = popularity.len();
    if popularity.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput("popularity entries must be finite and nonnegative".into()));
    }
    if popularity.iter().all(|&p| p == 0.0) {
        return Err(Error::ZeroPopularity);
    }
    let mass: f64 = popularity.iter().sum();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("popularity sums to {mass}, expected 1")));
    }
    if cache_size == 0 {
        return Err(Error::InvalidInput("cache size must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let max_pi = popularity.iter().copied().fold(0.0, f64::max);
    let delta0 = max_pi / k.g2;

    if cache_size >= n_f {
        return Ok(CachingSolve {
            policy: CachingPolicy { probs: vec![1.0; n_f], cache_size },
            multiplier: None,
            iterations: 0,
            delta0,
        });
    }
    let n_positive = popularity.iter().filter(|&&p| p > 0.0).count();
    if n_positive <= cache_size {
        let probs = popularity.iter().map(|&p| if p > 0.0 { 1.0 } else { 0.0 }).collect();
        return Ok(CachingSolve {
            policy: CachingPolicy { probs, cache_size },
            multiplier: None,
            iterations: 0,
            delta0,
        });
    }

    let floor = tol * delta0 * 1e-6;
    let (mut lo, mut hi) = (floor, delta0);
    let res_lo = multiplier_residual(lo, popularity, k, cache_size);
    let res_hi = multiplier_residual(hi, popularity, k, cache_size);
    if res_lo < 0.0 || res_hi > 0.0 {
        return Err(Error::Bracket { lo, hi, res_lo, res_hi });
    }

    let finish = |mu: f64, iterations: usize| CachingSolve {
        policy: CachingPolicy { probs: allocation_at(mu, popularity, k), cache_size },
        multiplier: Some(mu),
        iterations,
        delta0,
    };

    let mut iterations = 0;
    while hi - lo > floor {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        // floor can sit below the float spacing at the root
        if mid <= lo || mid >= hi {
            break;
        }
        let r = multiplier_residual(mid, popularity, k, cache_size);
        if r.abs() <= tol.max(residual_noise(mid, popularity, k, cache_size)) {
            return Ok(finish(mid, iterations));
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        // Once the bracket isolates the final clamping pattern the budget
        // equation is solved in closed form. Two guesses: the pattern at
        // the midpoint, and the pattern of contents not clamped over the
        // whole bracket (allocations fall with mu).
        let guesses = [
            multiplier_for_pattern(popularity, k, cache_size, |pi| {
                let c = allocation(pi, mid, k);
                classify(c, c)
            }),
            multiplier_for_pattern(popularity, k, cache_size, |pi| {
                classify(allocation(pi, hi, k), allocation(pi, lo, k))
            }),
        ];
        for mu in guesses.into_iter().flatten() {
            if mu > lo && mu < hi {
                let r2 = multiplier_residual(mu, popularity, k, cache_size);
                if r2.abs() <= tol.max(residual_noise(mu, popularity, k, cache_size)) {
                    return Ok(finish(mu, iterations));
                }
                if r2 > 0.0 {
                    lo = mu;
                } else {
                    hi = mu;
                }
            }
        }
    }
    Ok(finish(hi, iterations))
}
