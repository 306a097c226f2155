//! Special functions and the closed-form offload success probability.
//!
//! For a content cached with probability `c`, a user served by the nearest
//! caching base station in a PPP network (Rayleigh desired link, Gamma
//! interferer gains, interference-limited) attains SIR above `gamma0` with
//! probability `c / (G1 c + G2)`, where
//!
//! ```text
//! G2 = Gamma(1 - 2/a) Gamma(Nt + 2/a) / Gamma(Nt) * gamma0^(2/a)
//! G1 = 2F1(-2/a, Nt; 1 - 2/a; -gamma0) - G2
//! ```

use crate::catalog::UserPopulation;
use crate::demand::{popularity_after_rec, RecommendationPolicy};
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x already shifted by -1
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let s = (std::f64::consts::PI * x).sin();
        return Ok((std::f64::consts::PI / s).ln() - ln_gamma(1.0 - x)?);
    }
    if (1.0..=3.0).contains(&x) {
        // Near the roots at 1 and 2 go through Gamma itself so that the
        // result keeps relative accuracy.
        return Ok((gamma_lanczos(x) - 1.0).ln_1p());
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + (xm + 0.5) * t.ln() - t + lanczos_sum(xm).ln())
}

fn gamma_lanczos(x: f64) -> f64 {
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(xm + 0.5) * (-t).exp() * lanczos_sum(xm)
}

/// `Gamma(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    ln_gamma(x).map(f64::exp)
}

const SERIES_MAX_TERMS: usize = 10_000_000;

fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut small_run = 0;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            small_run += 1;
            if small_run == 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::Domain(format!("2F1({a}, {b}; {c}; {z}) series did not converge")))
}

/// Gauss hypergeometric function `2F1(a, b; c; z)` on the real axis `z < 1`.
///
/// Direct power series where it converges quickly; for `z < -1/2` the Pfaff
/// transformation `(1-z)^(-b) 2F1(c-a, b; c; z/(z-1))` maps the argument
/// into `(1/3, 1)`.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::Domain(format!("2F1: c = {c} is a nonpositive integer")));
    }
    if !(z < 1.0) || !z.is_finite() {
        return Err(Error::Domain(format!("2F1: z = {z} outside supported range z < 1")));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    if z < -0.5 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-b) * hyp2f1_series(c - a, b, c, w)?);
    }
    hyp2f1_series(a, b, c, z)
}

/// Radio parameters of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    /// Base-station density per unit area.
    pub lambda: f64,
    pub n_antennas: u32,
    pub pathloss_alpha: f64,
    /// Linear-scale SIR threshold.
    pub sir_threshold: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl NetworkParams {
    pub fn new(lambda: f64, n_antennas: u32, pathloss_alpha: f64, sir_threshold: f64) -> Result<Self> {
        let p = Self { lambda, n_antennas, pathloss_alpha, sir_threshold };
        p.validate()?;
        Ok(p)
    }

    /// Same as [`NetworkParams::new`] with the SIR threshold given in dB.
    pub fn with_threshold_db(lambda: f64, n_antennas: u32, pathloss_alpha: f64, sir_db: f64) -> Result<Self> {
        Self::new(lambda, n_antennas, pathloss_alpha, db_to_linear(sir_db))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_alpha > 2.0) {
            return Err(Error::Domain(format!("path-loss exponent must exceed 2, got {}", self.pathloss_alpha)));
        }
        if self.n_antennas == 0 {
            return Err(Error::Domain("need at least one antenna".into()));
        }
        if !(self.sir_threshold > 0.0) || !self.sir_threshold.is_finite() {
            return Err(Error::Domain(format!("SIR threshold must be positive, got {}", self.sir_threshold)));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!("density must be positive, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// The pair `(G1, G2)` of the closed-form offload probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirConstants {
    pub g1: f64,
    pub g2: f64,
}

impl SirConstants {
    pub fn new(g1: f64, g2: f64) -> Result<Self> {
        if !(g1 > 0.0) || !(g2 > 0.0) || !g1.is_finite() || !g2.is_finite() {
            return Err(Error::Domain(format!("invalid SIR constants ({g1}, {g2})")));
        }
        Ok(Self { g1, g2 })
    }

    /// Offload probability of a fully cached content, `1 / (G1 + G2)`.
    pub fn full_cache_prob(&self) -> f64 {
        1.0 / (self.g1 + self.g2)
    }
}

pub fn sir_constants(params: &NetworkParams) -> Result<SirConstants> {
    params.validate()?;
    let delta = 2.0 / params.pathloss_alpha;
    let nt = params.n_antennas as f64;
    let g2 = (ln_gamma(1.0 - delta)? + ln_gamma(nt + delta)? - ln_gamma(nt)?).exp()
        * params.sir_threshold.powf(delta);
    let f = gauss_2f1(-delta, nt, 1.0 - delta, -params.sir_threshold)?;
    Ok(SirConstants { g1: f - g2, g2 })
}

/// `P(SIR >= gamma0) = c / (G1 c + G2)`; zero for an uncached content.
pub fn offload_success_prob(c: f64, k: &SirConstants) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    c / (k.g1 * c + k.g2)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Successful offloading probability `sum_f pi_f P(SIR_f >= gamma0)` for a
/// post-recommendation popularity vector.
pub fn objective_from_popularity(caching: &[f64], popularity: &[f64], k: &SirConstants) -> f64 {
    let terms: Vec<f64> = caching
        .iter()
        .zip(popularity)
        .map(|(&c, &pi)| pi * offload_success_prob(c, k))
        .collect();
    pairwise_sum(&terms)
}

/// Successful offloading probability of a caching/recommendation pair.
pub fn objective(
    caching: &[f64],
    policy: &RecommendationPolicy,
    thresholds: &[f64],
    population: &UserPopulation,
    k: &SirConstants,
) -> Result<f64> {
    if caching.len() != population.n_contents() {
        return Err(Error::InvalidInput(format!(
            "caching vector has {} entries for {} contents",
            caching.len(),
            population.n_contents()
        )));
    }
    let pi = popularity_after_rec(policy, thresholds, population)?;
    Ok(objective_from_popularity(caching, &pi, k))
}
