//! User demand before and after recommendation.
//!
//! A listed content `f` becomes a candidate for user `u` when
//! `p_uf >= theta_u`. With candidate subset `A_u`, the user follows the list
//! with probability `q_u = |A_u| / N_m` (choosing within `A_u` in proportion
//! to inherent preference) and otherwise requests from the inherent row.

use crate::catalog::UserPopulation;
use crate::error::{Error, Result};

/// Per-user recommendation lists, each of exactly `list_size` distinct contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecommendationPolicy {
    lists: Vec<Vec<usize>>,
    list_size: usize,
}

impl RecommendationPolicy {
    pub fn new(lists: Vec<Vec<usize>>, list_size: usize, n_contents: usize) -> Result<Self> {
        if list_size > n_contents {
            return Err(Error::InvalidInput(format!(
                "list size {list_size} exceeds catalog size {n_contents}"
            )));
        }
        for (u, list) in lists.iter().enumerate() {
            if list.len() != list_size {
                return Err(Error::InvalidInput(format!(
                    "user {u} has {} recommendations, expected {list_size}",
                    list.len()
                )));
            }
            if list.iter().any(|&f| f >= n_contents) {
                return Err(Error::InvalidInput(format!("user {u}: content index out of range")));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::InvalidInput(format!("user {u}: duplicate recommendation")));
            }
        }
        Ok(Self { lists, list_size })
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn list(&self, u: usize) -> &[usize] {
        &self.lists[u]
    }

    pub fn list_size(&self) -> usize {
        self.list_size
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    /// Binary `m_uf` matrix.
    pub fn to_matrix(&self, n_contents: usize) -> Vec<Vec<u8>> {
        self.lists
            .iter()
            .map(|l| {
                let mut row = vec![0u8; n_contents];
                for &f in l {
                    row[f] = 1;
                }
                row
            })
            .collect()
    }
}

/// Demand of one user after seeing a list.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDemand {
    pub row: Vec<f64>,
    pub acceptance: f64,
    pub candidates: Vec<usize>,
}

/// Demand of every user after recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandAfterRec {
    pub rows: Vec<Vec<f64>>,
    pub acceptance: Vec<f64>,
    pub candidates: Vec<Vec<usize>>,
}

/// Listed contents with `p_uf >= theta`. The comparison is exact.
pub fn candidate_subset(list: &[usize], theta: f64, pref: &[f64]) -> Vec<usize> {
    list.iter().copied().filter(|&f| pref[f] >= theta).collect()
}

/// Full demand model for one user. `list_size` is `N_m`, which may exceed
/// `list.len()` while a list is being built.
pub fn user_demand(list: &[usize], theta: f64, pref: &[f64], list_size: usize) -> Result<UserDemand> {
    let candidates = candidate_subset(list, theta, pref);
    if candidates.is_empty() {
        return Ok(UserDemand { row: pref.to_vec(), acceptance: 0.0, candidates });
    }
    let mass: f64 = candidates.iter().map(|&f| pref[f]).sum();
    if mass <= 0.0 {
        return Err(Error::DegenerateCandidates { user: 0 });
    }
    let q = candidates.len() as f64 / list_size as f64;
    let mut row: Vec<f64> = pref.iter().map(|p| (1.0 - q) * p).collect();
    for &f in &candidates {
        row[f] += q * pref[f] / mass;
    }
    Ok(UserDemand { row, acceptance: q, candidates })
}

/// Post-recommendation request distribution `q_uf` of one user.
pub fn post_rec_preference(list: &[usize], theta: f64, pref: &[f64], list_size: usize) -> Result<Vec<f64>> {
    user_demand(list, theta, pref, list_size).map(|d| d.row)
}

/// Right end-point of the preference-grid interval containing `theta`.
///
/// The grid is the distinct values of `pref` plus the sentinels 0 and 1;
/// the result is the smallest grid value `>= theta`.
pub fn effective_threshold(theta: f64, pref: &[f64]) -> f64 {
    let mut best = 1.0f64;
    if theta <= 0.0 {
        return 0.0;
    }
    for &p in pref {
        if p >= theta && p < best {
            best = p;
        }
    }
    best
}

pub fn demand_after_rec(
    policy: &RecommendationPolicy,
    thresholds: &[f64],
    population: &UserPopulation,
) -> Result<DemandAfterRec> {
    check_shapes(policy.n_users(), thresholds, population)?;
    let mut out = DemandAfterRec {
        rows: Vec::with_capacity(population.n_users()),
        acceptance: Vec::with_capacity(population.n_users()),
        candidates: Vec::with_capacity(population.n_users()),
    };
    for u in 0..population.n_users() {
        let d = user_demand(policy.list(u), thresholds[u], population.row(u), policy.list_size())
            .map_err(|e| with_user(e, u))?;
        out.rows.push(d.row);
        out.acceptance.push(d.acceptance);
        out.candidates.push(d.candidates);
    }
    Ok(out)
}

/// Content popularity after recommendation, `pi_f = sum_u v_u q_uf`.
pub fn popularity_after_rec(
    policy: &RecommendationPolicy,
    thresholds: &[f64],
    population: &UserPopulation,
) -> Result<Vec<f64>> {
    check_shapes(policy.n_users(), thresholds, population)?;
    popularity_from_lists(policy.lists(), policy.list_size(), thresholds, population)
}

/// Popularity for possibly partial lists.
pub(crate) fn popularity_from_lists(
    lists: &[Vec<usize>],
    list_size: usize,
    thresholds: &[f64],
    population: &UserPopulation,
) -> Result<Vec<f64>> {
    let mut pop = vec![0.0; population.n_contents()];
    for (u, (list, v)) in lists.iter().zip(population.activity()).enumerate() {
        let row = post_rec_preference(list, thresholds[u], population.row(u), list_size)
            .map_err(|e| with_user(e, u))?;
        for (acc, q) in pop.iter_mut().zip(&row) {
            *acc += v * q;
        }
    }
    Ok(pop)
}

pub(crate) fn with_user(e: Error, u: usize) -> Error {
    match e {
        Error::DegenerateCandidates { .. } => Error::DegenerateCandidates { user: u },
        other => other,
    }
}

fn check_shapes(n_lists: usize, thresholds: &[f64], population: &UserPopulation) -> Result<()> {
    if n_lists != population.n_users() || thresholds.len() != population.n_users() {
        return Err(Error::InvalidInput(format!(
            "{} lists and {} thresholds for {} users",
            n_lists,
            thresholds.len(),
            population.n_users()
        )));
    }
    Ok(())
}
