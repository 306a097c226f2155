//! Generative request model with recommendation.
//!
//! A request first picks its user by activity level. The user then follows
//! the list with probability `|A_u| / N_m`, choosing a candidate in
//! proportion to inherent preference, and otherwise requests from the
//! inherent preference row.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::catalog::UserPopulation;
use crate::demand::candidate_subset;
use crate::error::{Error, Result};

/// One observed request. `from_list` is true only when the request came
/// through the recommendation branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestObservation {
    pub user: usize,
    pub content: usize,
    pub from_list: bool,
}

/// Categorical sampler over users.
#[derive(Debug, Clone)]
pub struct UserSampler {
    index: WeightedIndex<f64>,
}

impl UserSampler {
    pub fn new(activity: &[f64]) -> Result<Self> {
        crate::check_distribution(activity, "activity vector")?;
        let index = WeightedIndex::new(activity)
            .map_err(|e| Error::InvalidInput(format!("activity vector: {e}")))?;
        Ok(Self { index })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

pub fn sample_user<R: Rng + ?Sized>(activity: &[f64], rng: &mut R) -> Result<usize> {
    Ok(UserSampler::new(activity)?.sample(rng))
}

/// Draws an index from `items` with probability proportional to `weight`.
fn draw_weighted<R: Rng + ?Sized>(items: impl Iterator<Item = usize> + Clone, weight: &[f64], rng: &mut R) -> usize {
    let total: f64 = items.clone().map(|f| weight[f]).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for f in items {
        if weight[f] <= 0.0 {
            continue;
        }
        acc += weight[f];
        last = Some(f);
        if acc > target {
            return f;
        }
    }
    last.expect("at least one positive weight")
}

/// Generates one request of user `user` who sees `list`.
pub fn generate_request<R: Rng + ?Sized>(
    user: usize,
    list: &[usize],
    theta: f64,
    pref: &[f64],
    list_size: usize,
    rng: &mut R,
) -> RequestObservation {
    let candidates = candidate_subset(list, theta, pref);
    let accept = candidates.len() as f64 / list_size as f64;
    let has_mass = candidates.iter().any(|&f| pref[f] > 0.0);
    if has_mass && rng.random::<f64>() < accept {
        let content = draw_weighted(candidates.iter().copied(), pref, rng);
        RequestObservation { user, content, from_list: true }
    } else {
        let content = draw_weighted(0..pref.len(), pref, rng);
        RequestObservation { user, content, from_list: false }
    }
}

/// `n_requests` requests against the given lists under thresholds `theta`.
pub fn generate_slot<R: Rng + ?Sized>(
    population: &UserPopulation,
    lists: &[Vec<usize>],
    list_size: usize,
    theta: &[f64],
    n_requests: usize,
    rng: &mut R,
) -> Result<Vec<RequestObservation>> {
    let users = UserSampler::new(population.activity())?;
    Ok((0..n_requests)
        .map(|_| {
            let u = users.sample(rng);
            generate_request(u, &lists[u], theta[u], population.row(u), list_size, rng)
        })
        .collect())
}
