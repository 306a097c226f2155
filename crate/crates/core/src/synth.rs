//! Synthetic instances for experiments without a play-count log.
//!
//! Global popularity follows Zipf(`s`). Each user's row is a Dirichlet
//! draw centered on a mix of the global Zipf profile and a Zipf profile
//! over a user-specific random ranking, so users share a global trend but
//! have individual favorites. Activity levels are a flat Dirichlet draw.
//!
//! [`softmax_population`] instead draws Gaussian feature vectors for users
//! and contents and takes the softmax of their inner products.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::catalog::{softmax_preference, Catalog, UserPopulation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_contents: usize,
    pub zipf_exponent: f64,
    /// Total Dirichlet mass per user row; smaller means noisier rows.
    pub concentration: f64,
    /// Weight in `[0, 1]` of the user-specific ranking in each row's center.
    pub personalization: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n_users: 50, n_contents: 100, zipf_exponent: 0.8, concentration: 20.0, personalization: 0.7, seed: 2019 }
    }
}

/// Normalized Zipf weights `f^-s / H`.
pub fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=n).map(|f| (f as f64).powf(-exponent)).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    loop {
        let mut draws = Vec::with_capacity(alpha.len());
        for &a in alpha {
            let g = Gamma::new(a, 1.0).map_err(|e| Error::InvalidInput(format!("Dirichlet weight {a}: {e}")))?;
            draws.push(g.sample(rng));
        }
        let z: f64 = draws.iter().sum();
        if z > 0.0 {
            return Ok(draws.into_iter().map(|x| x / z).collect());
        }
    }
}

pub fn zipf_population(spec: &SynthSpec) -> Result<UserPopulation> {
    if spec.n_users == 0 || spec.n_contents == 0 {
        return Err(Error::InvalidInput("synthetic instance needs users and contents".into()));
    }
    if !(spec.concentration > 0.0) || !(spec.zipf_exponent >= 0.0) || !(0.0..=1.0).contains(&spec.personalization) {
        return Err(Error::InvalidInput(
            "need concentration > 0, Zipf exponent >= 0 and personalization in [0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = zipf_weights(spec.n_contents, spec.zipf_exponent);
    let beta = spec.personalization;
    let mut rows = Vec::with_capacity(spec.n_users);
    for _ in 0..spec.n_users {
        let mut ranking: Vec<usize> = (0..spec.n_contents).collect();
        ranking.shuffle(&mut rng);
        let mut alpha: Vec<f64> = base.iter().map(|w| (1.0 - beta) * w).collect();
        for (rank, &f) in ranking.iter().enumerate() {
            alpha[f] += beta * base[rank];
        }
        alpha.iter_mut().for_each(|a| *a *= spec.concentration);
        rows.push(renormalize(dirichlet(&alpha, &mut rng)?));
    }
    let activity = renormalize(dirichlet(&vec![1.0; spec.n_users], &mut rng)?);
    UserPopulation::new(activity, rows)
}

/// Population whose preferences are `softmax(x_f . y_u)` with entries of
/// `x_f`, `y_u` drawn from `N(0, scale^2)`. Features are kept on the result.
pub fn softmax_population(n_users: usize, n_contents: usize, dim: usize, scale: f64, seed: u64) -> Result<(UserPopulation, Catalog)> {
    if n_users == 0 || n_contents == 0 || dim == 0 {
        return Err(Error::InvalidInput("softmax instance needs users, contents and a feature dimension".into()));
    }
    let normal = Normal::new(0.0, scale).map_err(|e| Error::InvalidInput(format!("feature scale {scale}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect()).collect() };
    let content_features = draw(n_contents);
    let user_features = draw(n_users);
    let catalog = Catalog::with_features(content_features)?;
    let activity = renormalize(dirichlet(&vec![1.0; n_users], &mut rng)?);
    let uniform = vec![vec![1.0 / n_contents as f64; n_contents]; n_users];
    let placeholder = UserPopulation::new(activity.clone(), uniform)?.with_features(user_features.clone())?;
    let rows = softmax_preference(&catalog, &placeholder)?;
    let population = UserPopulation::new(activity, rows)?.with_features(user_features)?;
    Ok((population, catalog))
}

/// Corrects rounding so the vector sums to one as closely as possible.
fn renormalize(mut v: Vec<f64>) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

/// Thresholds drawn independently from `Uniform[0, theta_max]`.
pub fn uniform_thresholds<R: Rng + ?Sized>(n_users: usize, theta_max: f64, rng: &mut R) -> Vec<f64> {
    (0..n_users).map(|_| rng.random::<f64>() * theta_max.clamp(0.0, 1.0)).collect()
}
