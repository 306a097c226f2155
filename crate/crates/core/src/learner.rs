//! Epsilon-greedy learning of unknown psychological thresholds.
//!
//! Every slot either exploits (greedy joint policy on the current estimate)
//! or explores (random lists drawn below the estimate). A request made
//! through the list for content `f` proves `theta_u <= p_uf`, so the
//! estimate only ever moves down to witnessed preference values.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cacheopt::solve_caching;
use crate::catalog::UserPopulation;
use crate::demand::{effective_threshold, popularity_after_rec, RecommendationPolicy};
use crate::error::{Error, Result};
use crate::recopt::{greedy_joint, top_by_preference, JointPolicy};
use crate::reqsim::{generate_slot, RequestObservation};
use crate::sgeom::{objective, objective_from_popularity, SirConstants};

/// Per-user threshold estimates, initialized at the upper bound 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdEstimate {
    values: Vec<f64>,
    updates: Vec<usize>,
}

impl ThresholdEstimate {
    pub fn new(n_users: usize) -> Self {
        Self { values: vec![1.0; n_users], updates: vec![0; n_users] }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("threshold estimates must lie in [0, 1]".into()));
        }
        let n = values.len();
        Ok(Self { values, updates: vec![0; n] })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn updates(&self) -> &[usize] {
        &self.updates
    }

    /// Applies one observation; returns whether the estimate moved.
    pub fn update(&mut self, obs: &RequestObservation, pref: &[Vec<f64>]) -> bool {
        let p = pref[obs.user][obs.content];
        if obs.from_list && self.values[obs.user] > p {
            self.values[obs.user] = p;
            self.updates[obs.user] += 1;
            true
        } else {
            false
        }
    }
}

/// Functional form of [`ThresholdEstimate::update`].
pub fn update_threshold(est: &ThresholdEstimate, obs: &RequestObservation, pref: &[Vec<f64>]) -> ThresholdEstimate {
    let mut next = est.clone();
    next.update(obs, pref);
    next
}

/// Random lists drawn uniformly from `{f : p_uf < theta_hat_u}`, topped up
/// by descending preference when that set is too small.
pub fn exploration_policy<R: Rng + ?Sized>(
    est: &ThresholdEstimate,
    population: &UserPopulation,
    list_size: usize,
    rng: &mut R,
) -> Result<RecommendationPolicy> {
    let lists = (0..population.n_users())
        .map(|u| {
            let row = population.row(u);
            let below: Vec<usize> = (0..row.len()).filter(|&f| row[f] < est.values[u]).collect();
            if below.len() >= list_size {
                sample(rng, below.len(), list_size).into_iter().map(|i| below[i]).collect()
            } else {
                let mut list = below.clone();
                let rest: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .map(|(f, &p)| if below.contains(&f) { f64::NEG_INFINITY } else { p })
                    .collect();
                list.extend(top_by_preference(&rest, list_size - below.len()));
                list
            }
        })
        .collect();
    RecommendationPolicy::new(lists, list_size, population.n_contents())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Constant(f64),
    /// `min(1, 1/t)`.
    InverseTime,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidInput(format!("epsilon must lie in [0, 1], got {eps}")));
        }
        Ok(Self::Constant(eps))
    }

    /// Exploration probability at slot `t >= 1`.
    pub fn epsilon(&self, t: usize) -> f64 {
        match *self {
            Self::Constant(e) => e,
            Self::InverseTime => (1.0 / t.max(1) as f64).min(1.0),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant(e) => format!("{e}"),
            Self::InverseTime => "1/t".to_string(),
        }
    }
}

impl std::str::FromStr for EpsilonSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1/t" | "inverse_time" => Ok(Self::InverseTime),
            other => {
                let e = other
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("unknown epsilon schedule {other:?}")))?;
                Self::constant(e)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotMode {
    Exploitation,
    Exploration,
}

impl SlotMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exploitation => "exploit",
            Self::Exploration => "explore",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SlotRecord {
    pub slot: usize,
    pub epsilon: f64,
    pub mode: SlotMode,
    pub policy: JointPolicy,
    pub observations: Vec<RequestObservation>,
    /// Objective of this slot's policy evaluated under the true thresholds.
    pub objective: f64,
    /// Estimate at the end of the slot.
    pub estimate: Vec<f64>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LearningConfig {
    pub cache_size: usize,
    pub list_size: usize,
    pub schedule: EpsilonSchedule,
    pub n_slots: usize,
    pub requests_per_slot: usize,
    pub seed: u64,
    pub tol: f64,
    /// Stop this many slots after every user has converged.
    pub stop_after_convergence: Option<usize>,
    /// Starting estimate; all ones when absent.
    pub initial_estimate: Option<Vec<f64>>,
}

impl LearningConfig {
    /// Config with `tol = 1e-9`, no early stop and the default start.
    pub fn new(cache_size: usize, list_size: usize, schedule: EpsilonSchedule, n_slots: usize, requests_per_slot: usize, seed: u64) -> Self {
        Self {
            cache_size,
            list_size,
            schedule,
            n_slots,
            requests_per_slot,
            seed,
            tol: 1e-9,
            stop_after_convergence: None,
            initial_estimate: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearningRun {
    pub records: Vec<SlotRecord>,
    /// Oracle policy computed with the true thresholds.
    pub oracle: JointPolicy,
    /// Value each estimate converges to.
    pub targets: Vec<f64>,
    /// First slot after which a user's estimate equals its target
    /// (0 when already equal initially).
    pub convergence_slot: Vec<Option<usize>>,
}

impl LearningRun {
    pub fn all_converged(&self) -> bool {
        self.convergence_slot.iter().all(Option::is_some)
    }

    /// Mean requests per slot issued by each user.
    pub fn requests_per_user(&self, n_users: usize) -> Vec<f64> {
        let mut counts = vec![0usize; n_users];
        for r in &self.records {
            for o in &r.observations {
                counts[o.user] += 1;
            }
        }
        let n = self.records.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Threshold value the estimate of a user converges to: the smallest
/// preference value at or above `theta` (1 when none). A zero threshold
/// can only be witnessed down to the smallest positive preference.
pub fn convergence_target(theta: f64, pref: &[f64]) -> f64 {
    let t = effective_threshold(theta, pref);
    if t > 0.0 {
        return t;
    }
    min_positive(pref).unwrap_or(1.0)
}

/// `rho_u`: smallest positive preference of a row.
pub fn min_positive(pref: &[f64]) -> Option<f64> {
    pref.iter().copied().filter(|&p| p > 0.0).reduce(f64::min)
}

/// Upper bound on the mean number of slots before a user's estimate
/// converges: `N_f^2 / eps * (N_m - N_m (1 - rho/N_m)^N_q)^-1`.
pub fn convergence_bound(eps: f64, n_contents: usize, list_size: usize, rho: f64, requests: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("bound needs epsilon in (0, 1], got {eps}")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1], got {rho}")));
    }
    if !(requests >= 1.0) {
        return Err(Error::Domain(format!("need at least one request per slot, got {requests}")));
    }
    if list_size == 0 {
        return Err(Error::Domain("list size must be positive".into()));
    }
    let nm = list_size as f64;
    let hit = nm - nm * (1.0 - rho / nm).powf(requests);
    Ok((n_contents as f64).powi(2) / eps / hit)
}

/// Runs the epsilon-greedy loop. True thresholds are used only to simulate
/// requests and to score each slot's policy.
pub fn run_learning(population: &UserPopulation, constants: &SirConstants, cfg: &LearningConfig) -> Result<LearningRun> {
    let truth = population
        .thresholds()
        .ok_or_else(|| Error::InvalidInput("learning needs ground-truth thresholds".into()))?
        .to_vec();
    let n_u = population.n_users();
    let targets: Vec<f64> = (0..n_u).map(|u| convergence_target(truth[u], population.row(u))).collect();
    let oracle = greedy_joint(population, &truth, constants, cfg.cache_size, cfg.list_size, cfg.tol)?;

    let stream = |s: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
        r.set_stream(s);
        r
    };
    let (mut mode_rng, mut explore_rng, mut request_rng) = (stream(0), stream(1), stream(2));

    let mut est = match &cfg.initial_estimate {
        Some(v) if v.len() != n_u => {
            return Err(Error::InvalidInput(format!("{} initial estimates for {n_u} users", v.len())));
        }
        Some(v) => ThresholdEstimate::from_values(v.clone())?,
        None => ThresholdEstimate::new(n_u),
    };
    let mut convergence_slot: Vec<Option<usize>> =
        (0..n_u).map(|u| (est.values[u] == targets[u]).then_some(0)).collect();
    let mut exploit_memo: Option<(Vec<f64>, JointPolicy)> = None;
    let mut records = Vec::with_capacity(cfg.n_slots.min(1 << 16));
    let mut all_converged_at = convergence_slot.iter().all(Option::is_some).then_some(0);

    for t in 1..=cfg.n_slots {
        if let (Some(at), Some(extra)) = (all_converged_at, cfg.stop_after_convergence) {
            if t > at + extra {
                break;
            }
        }
        let eps = cfg.schedule.epsilon(t);
        let mode = if mode_rng.random::<f64>() < eps { SlotMode::Exploration } else { SlotMode::Exploitation };
        let policy = match mode {
            SlotMode::Exploitation => match &exploit_memo {
                Some((theta, p)) if theta.as_slice() == est.values() => p.clone(),
                _ => {
                    let p = greedy_joint(population, est.values(), constants, cfg.cache_size, cfg.list_size, cfg.tol)?;
                    exploit_memo = Some((est.values().to_vec(), p.clone()));
                    p
                }
            },
            SlotMode::Exploration => {
                let rec = exploration_policy(&est, population, cfg.list_size, &mut explore_rng)?;
                let pi = popularity_after_rec(&rec, est.values(), population)?;
                let caching = solve_caching(&pi, constants, cfg.cache_size, cfg.tol)?.policy;
                let achieved_objective = objective_from_popularity(caching.probs(), &pi, constants);
                JointPolicy { recommendation: Some(rec), caching, achieved_objective }
            }
        };
        let rec = policy.recommendation.as_ref().expect("learning policies carry lists");
        let realized = objective(policy.caching.probs(), rec, &truth, population, constants)?;
        let observations =
            generate_slot(population, rec.lists(), cfg.list_size, &truth, cfg.requests_per_slot, &mut request_rng)?;
        for o in &observations {
            est.update(o, population.preference());
        }
        let converged: Vec<bool> = (0..n_u).map(|u| est.values[u] == targets[u]).collect();
        for u in 0..n_u {
            if converged[u] && convergence_slot[u].is_none() {
                convergence_slot[u] = Some(t);
            }
        }
        if all_converged_at.is_none() && converged.iter().all(|&c| c) {
            all_converged_at = Some(t);
        }
        records.push(SlotRecord {
            slot: t,
            epsilon: eps,
            mode,
            policy,
            observations,
            objective: realized,
            estimate: est.values().to_vec(),
            converged,
        });
    }
    Ok(LearningRun { records, oracle, targets, convergence_slot })
}
