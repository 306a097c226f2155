//! Comparison policies, all scored with the same offloading objective.
//!
//! 1. `rec_up_cache_pop_rec_adj`: top-N_m lists, cache the most popular
//!    contents after recommendation, then swap uncached list entries for
//!    cached ones from each user's potential set.
//! 2. `rec_pop_cache_pop`: one shared list built greedily, top-N_c caching.
//! 3. `cache_opt_rec_up`: caching optimized on inherent popularity,
//!    top-N_m lists.
//! 4. `cache_opt_no_rec`: caching optimized on inherent popularity, no lists.

use crate::cacheopt::{optimal_caching, CachingPolicy};
use crate::catalog::UserPopulation;
use crate::demand::{popularity_after_rec, popularity_from_lists, RecommendationPolicy};
use crate::error::Result;
use crate::recopt::{potential_set, top_by_preference, JointPolicy, TIE_EPS};
use crate::sgeom::{objective_from_popularity, SirConstants};

/// Deterministic 0/1 caching of the `cache_size` most popular contents
/// (ties by ascending index).
pub fn top_n_caching(popularity: &[f64], cache_size: usize) -> CachingPolicy {
    let mut probs = vec![0.0; popularity.len()];
    for f in top_by_preference(popularity, cache_size.min(popularity.len())) {
        probs[f] = 1.0;
    }
    CachingPolicy::new(probs, cache_size).expect("0/1 vector within budget")
}

fn top_lists(population: &UserPopulation, list_size: usize) -> Vec<Vec<usize>> {
    (0..population.n_users()).map(|u| top_by_preference(population.row(u), list_size)).collect()
}

/// Baseline 1: "Rec UP - Cache Pop - Rec Adj".
pub fn rec_up_cache_pop_rec_adj(
    population: &UserPopulation,
    thresholds: &[f64],
    k: &SirConstants,
    cache_size: usize,
    list_size: usize,
) -> Result<JointPolicy> {
    let n_f = population.n_contents();
    let mut lists = top_lists(population, list_size);
    let pi = popularity_from_lists(&lists, list_size, thresholds, population)?;
    let caching = top_n_caching(&pi, cache_size);
    let cached = |f: usize| caching.probs()[f] == 1.0;

    for (u, list) in lists.iter_mut().enumerate() {
        let row = population.row(u);
        // highest preference first
        let replacements: Vec<usize> =
            potential_set(row, thresholds[u], list_size).into_iter().filter(|&f| cached(f) && !list.contains(&f)).collect();
        let mut replacements = replacements.into_iter();
        // lowest preference first
        let mut uncached: Vec<usize> = (0..list.len()).filter(|&i| !cached(list[i])).collect();
        uncached.sort_by(|&a, &b| row[list[a]].total_cmp(&row[list[b]]).then(list[b].cmp(&list[a])));
        for slot in uncached {
            match replacements.next() {
                Some(f) => list[slot] = f,
                None => break,
            }
        }
    }

    let rec = RecommendationPolicy::new(lists, list_size, n_f)?;
    let pi = popularity_after_rec(&rec, thresholds, population)?;
    let achieved_objective = objective_from_popularity(caching.probs(), &pi, k);
    Ok(JointPolicy { recommendation: Some(rec), caching, achieved_objective })
}

/// Baseline 2: "Rec Pop - Cache Pop". One list shared by every user, grown
/// greedily; caching holds the top-N_c contents of the resulting popularity.
pub fn rec_pop_cache_pop(
    population: &UserPopulation,
    thresholds: &[f64],
    k: &SirConstants,
    cache_size: usize,
    list_size: usize,
) -> Result<JointPolicy> {
    let (n_u, n_f) = (population.n_users(), population.n_contents());
    let mut shared: Vec<usize> = Vec::with_capacity(list_size);
    for _ in 0..list_size {
        let mut best: Option<(usize, f64)> = None;
        for f in (0..n_f).filter(|f| !shared.contains(f)) {
            let mut trial = shared.clone();
            trial.push(f);
            let lists = vec![trial; n_u];
            let pi = popularity_from_lists(&lists, list_size, thresholds, population)?;
            let c = top_n_caching(&pi, cache_size);
            let obj = objective_from_popularity(c.probs(), &pi, k);
            if best.is_none_or(|(_, b)| obj > b + TIE_EPS) {
                best = Some((f, obj));
            }
        }
        shared.push(best.expect("list size within catalog").0);
    }
    let rec = RecommendationPolicy::new(vec![shared; n_u], list_size, n_f)?;
    let pi = popularity_after_rec(&rec, thresholds, population)?;
    let caching = top_n_caching(&pi, cache_size);
    let achieved_objective = objective_from_popularity(caching.probs(), &pi, k);
    Ok(JointPolicy { recommendation: Some(rec), caching, achieved_objective })
}

/// Baseline 3: "Cache Opt - Rec UP". Caching ignores the effect of the
/// lists, but the objective accounts for it.
pub fn cache_opt_rec_up(
    population: &UserPopulation,
    thresholds: &[f64],
    k: &SirConstants,
    cache_size: usize,
    list_size: usize,
    tol: f64,
) -> Result<JointPolicy> {
    let caching = optimal_caching(&population.inherent_popularity(), k, cache_size, tol)?;
    let rec = RecommendationPolicy::new(top_lists(population, list_size), list_size, population.n_contents())?;
    let pi = popularity_after_rec(&rec, thresholds, population)?;
    let achieved_objective = objective_from_popularity(caching.probs(), &pi, k);
    Ok(JointPolicy { recommendation: Some(rec), caching, achieved_objective })
}

/// Baseline 4: "Cache Opt - No Rec".
pub fn cache_opt_no_rec(population: &UserPopulation, k: &SirConstants, cache_size: usize, tol: f64) -> Result<JointPolicy> {
    let pi = population.inherent_popularity();
    let caching = optimal_caching(&pi, k, cache_size, tol)?;
    let achieved_objective = objective_from_popularity(caching.probs(), &pi, k);
    Ok(JointPolicy { recommendation: None, caching, achieved_objective })
}

/// Objectives of the four baselines in order.
pub fn all_baselines(
    population: &UserPopulation,
    thresholds: &[f64],
    k: &SirConstants,
    cache_size: usize,
    list_size: usize,
    tol: f64,
) -> Result<[JointPolicy; 4]> {
    Ok([
        rec_up_cache_pop_rec_adj(population, thresholds, k, cache_size, list_size)?,
        rec_pop_cache_pop(population, thresholds, k, cache_size, list_size)?,
        cache_opt_rec_up(population, thresholds, k, cache_size, list_size, tol)?,
        cache_opt_no_rec(population, k, cache_size, tol)?,
    ])
}
