//! Greedy joint construction of recommendation lists with optimal caching
//! re-solved for every tentative addition.

use rayon::prelude::*;

use crate::cacheopt::{solve_caching, CachingPolicy};
use crate::catalog::UserPopulation;
use crate::demand::{popularity_from_lists, post_rec_preference, with_user, RecommendationPolicy};
use crate::error::{Error, Result};
use crate::sgeom::{objective_from_popularity, SirConstants};

/// Gains closer than this are treated as ties.
pub const TIE_EPS: f64 = 1e-15;

/// Top-`N_a` contents of a preference row, `N_a = |{f : p_f >= theta}| + N_m`
/// capped at `N_f`. Ties break by ascending index; the result is sorted by
/// descending preference.
pub fn potential_set(pref: &[f64], theta: f64, list_size: usize) -> Vec<usize> {
    let n_a = (pref.iter().filter(|&&p| p >= theta).count() + list_size).min(pref.len());
    top_by_preference(pref, n_a)
}

pub(crate) fn top_by_preference(pref: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pref.len()).collect();
    idx.sort_by(|&a, &b| pref[b].total_cmp(&pref[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Per-user potential recommendation sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialSets {
    pub sets: Vec<Vec<usize>>,
}

impl PotentialSets {
    pub fn build(population: &UserPopulation, thresholds: &[f64], list_size: usize) -> Self {
        let sets = (0..population.n_users())
            .map(|u| potential_set(population.row(u), thresholds[u], list_size))
            .collect();
        Self { sets }
    }

    pub fn size(&self, u: usize) -> usize {
        self.sets[u].len()
    }
}

/// A recommendation policy, the caching policy paired with it, and the
/// resulting successful offloading probability.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    /// `None` for caching-only policies.
    pub recommendation: Option<RecommendationPolicy>,
    pub caching: CachingPolicy,
    pub achieved_objective: f64,
}

/// Bookkeeping of one greedy run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GreedyTrace {
    /// Objective after every commit.
    pub committed: Vec<f64>,
    /// `(user, content)` in commit order.
    pub commits: Vec<(usize, usize)>,
    /// Tentative evaluations, each with its own caching solve.
    pub caching_solves: usize,
    pub max_bisection_iterations: usize,
    /// Largest `delta0` seen by the inner solver.
    pub max_delta0: f64,
}

/// Inputs shared by every tentative evaluation.
#[derive(Debug, Clone, Copy)]
pub struct GreedyConfig<'a> {
    pub population: &'a UserPopulation,
    pub thresholds: &'a [f64],
    pub constants: &'a SirConstants,
    pub cache_size: usize,
    pub list_size: usize,
    pub tol: f64,
}

struct Eval {
    objective: f64,
    iterations: usize,
    delta0: f64,
}

fn evaluate(popularity: &[f64], cfg: &GreedyConfig<'_>) -> Result<(CachingPolicy, Eval)> {
    let s = solve_caching(popularity, cfg.constants, cfg.cache_size, cfg.tol)?;
    let objective = objective_from_popularity(s.policy.probs(), popularity, cfg.constants);
    Ok((s.policy, Eval { objective, iterations: s.iterations, delta0: s.delta0 }))
}

/// Objective after adding `content` to `user`'s list and re-solving the
/// caching policy. `lists` is not modified.
pub fn objective_with_tentative(lists: &[Vec<usize>], user: usize, content: usize, cfg: &GreedyConfig<'_>) -> Result<f64> {
    if lists[user].contains(&content) {
        return Err(Error::InvalidInput(format!("content {content} already recommended to user {user}")));
    }
    let mut trial = lists.to_vec();
    trial[user].push(content);
    let pi = popularity_from_lists(&trial, cfg.list_size, cfg.thresholds, cfg.population)?;
    Ok(evaluate(&pi, cfg)?.1.objective)
}

pub fn greedy_joint(
    population: &UserPopulation,
    thresholds: &[f64],
    constants: &SirConstants,
    cache_size: usize,
    list_size: usize,
    tol: f64,
) -> Result<JointPolicy> {
    let cfg = GreedyConfig { population, thresholds, constants, cache_size, list_size, tol };
    greedy_joint_traced(&cfg).map(|(p, _)| p)
}

/// Greedy construction: at every step commit the `(user, content)` pair
/// whose addition yields the largest objective, until every list is full.
pub fn greedy_joint_traced(cfg: &GreedyConfig<'_>) -> Result<(JointPolicy, GreedyTrace)> {
    let pop = cfg.population;
    let (n_u, n_f) = (pop.n_users(), pop.n_contents());
    if cfg.thresholds.len() != n_u {
        return Err(Error::InvalidInput(format!("{} thresholds for {n_u} users", cfg.thresholds.len())));
    }
    if cfg.list_size > n_f {
        return Err(Error::InvalidInput(format!("list size {} exceeds catalog size {n_f}", cfg.list_size)));
    }

    let mut remaining = PotentialSets::build(pop, cfg.thresholds, cfg.list_size).sets;
    for set in &mut remaining {
        set.sort_unstable();
    }
    let mut lists: Vec<Vec<usize>> = vec![Vec::with_capacity(cfg.list_size); n_u];
    let mut rows: Vec<Vec<f64>> = pop.preference().to_vec();
    let mut popularity = pop.inherent_popularity();
    let mut trace = GreedyTrace::default();
    let mut committed: Option<(CachingPolicy, f64)> = None;

    if cfg.list_size > 0 {
        loop {
            let active: Vec<usize> = (0..n_u).filter(|&u| lists[u].len() < cfg.list_size).collect();
            if active.is_empty() {
                break;
            }
            if let Some(&u) = active.iter().find(|&&u| remaining[u].is_empty()) {
                return Err(Error::PotentialSetExhausted { user: u, have: lists[u].len(), need: cfg.list_size });
            }
            let candidates: Vec<(usize, usize)> =
                active.iter().flat_map(|&u| remaining[u].iter().map(move |&f| (u, f))).collect();

            let evals: Vec<Result<Eval>> = candidates
                .par_iter()
                .map(|&(u, f)| {
                    let mut list = lists[u].clone();
                    list.push(f);
                    let row = post_rec_preference(&list, cfg.thresholds[u], pop.row(u), cfg.list_size)
                        .map_err(|e| with_user(e, u))?;
                    let v = pop.activity()[u];
                    let pi: Vec<f64> = popularity
                        .iter()
                        .zip(row.iter().zip(&rows[u]))
                        .map(|(p, (new, old))| p + v * (new - old))
                        .collect();
                    evaluate(&pi, cfg).map(|(_, e)| e)
                })
                .collect();

            let mut best: Option<(usize, f64)> = None;
            for (i, e) in evals.into_iter().enumerate() {
                let e = e?;
                trace.caching_solves += 1;
                trace.max_bisection_iterations = trace.max_bisection_iterations.max(e.iterations);
                trace.max_delta0 = trace.max_delta0.max(e.delta0);
                if best.is_none_or(|(_, b)| e.objective > b + TIE_EPS) {
                    best = Some((i, e.objective));
                }
            }
            let (i, _) = best.expect("candidate set is nonempty");
            let (u, f) = candidates[i];
            lists[u].push(f);
            remaining[u].retain(|&x| x != f);

            rows[u] = post_rec_preference(&lists[u], cfg.thresholds[u], pop.row(u), cfg.list_size)
                .map_err(|e| with_user(e, u))?;
            popularity = popularity_from_lists(&lists, cfg.list_size, cfg.thresholds, pop)?;
            let (caching, e) = evaluate(&popularity, cfg)?;
            trace.committed.push(e.objective);
            trace.commits.push((u, f));
            committed = Some((caching, e.objective));
        }
    }

    let (caching, achieved_objective) = match committed {
        Some(c) => c,
        None => evaluate(&popularity, cfg).map(|(c, e)| (c, e.objective))?,
    };
    let recommendation = RecommendationPolicy::new(lists, cfg.list_size, n_f)?;
    Ok((JointPolicy { recommendation: Some(recommendation), caching, achieved_objective }, trace))
}
