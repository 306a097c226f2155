//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recache::cacheopt::optimal_caching;
use recache::catalog::UserPopulation;
use recache::demand::{popularity_after_rec, RecommendationPolicy};
use recache::sgeom::{objective_from_popularity, SirConstants};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `eps`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * eps {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), eps, 50)
}

/// `G1`, `G2` from the radial integrals of the interference Laplace
/// transform. With `g(s) = 1 - (1 + gamma0 s^-alpha)^-N_t`,
/// `J0 = 2 int_0^1 g(s) s ds`, `I1 = 2 int_1^inf g(s) s ds`, and the
/// success probability is `c / (c (1 - J0) + J0 + I1)`.
pub fn sir_constants_by_quadrature(alpha: f64, nt: u32, gamma0: f64) -> (f64, f64) {
    let nt = nt as f64;
    let g = move |s: f64| -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        // 1 - (1+x)^-nt without cancellation
        let x = gamma0 * s.powf(-alpha);
        -(-nt * x.ln_1p()).exp_m1()
    };
    let j0 = 2.0 * adaptive_simpson(&|s| g(s) * s, 0.0, 1.0, 1e-15);
    // s = w^-4 maps [1, inf) to (0, 1]; ds = -4 w^-5 dw, so the integrand
    // becomes 4 g(w^-4) w^-9, which vanishes like w^(4 alpha - 9) at 0.
    let i1 = 2.0
        * adaptive_simpson(
            &|w| {
                if w == 0.0 {
                    0.0
                } else {
                    4.0 * g(w.powi(-4)) * w.powi(-9)
                }
            },
            0.0,
            1.0,
            1e-15,
        );
    (1.0 - j0, j0 + i1)
}

/// Success probability `c / (G1 c + G2)` written out independently.
pub fn success(c: f64, k: &SirConstants) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c / (k.g1 * c + k.g2)
    }
}

/// Caching objective evaluated directly.
pub fn caching_value(c: &[f64], pi: &[f64], k: &SirConstants) -> f64 {
    c.iter().zip(pi).map(|(&c, &p)| p * success(c, k)).sum()
}

/// Maximizer of the separable concave caching objective over the grid
/// `{0, h, 2h, ..., 1}^N_f` with `sum <= N_c`: repeatedly add one step to
/// the entry with the largest marginal gain.
pub fn grid_caching_oracle(pi: &[f64], k: &SirConstants, cache_size: usize, h: f64) -> Vec<f64> {
    let n = pi.len();
    let steps_per_unit = (1.0 / h).round() as usize;
    let mut units = vec![0usize; n];
    let value = |f: usize, u: usize| pi[f] * success(u as f64 * h, k);
    for _ in 0..cache_size * steps_per_unit {
        let mut best: Option<(usize, f64)> = None;
        for f in 0..n {
            if units[f] == steps_per_unit {
                continue;
            }
            let gain = value(f, units[f] + 1) - value(f, units[f]);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((f, gain));
            }
        }
        match best {
            Some((f, g)) if g > 0.0 => units[f] += 1,
            _ => break,
        }
    }
    units.into_iter().map(|u| u as f64 * h).collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for f in start..n {
            cur.push(f);
            go(f + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best joint objective over every combination of lists, each scored with
/// the optimal caching policy for its post-recommendation popularity.
pub fn exhaustive_joint_optimum(
    pop: &UserPopulation,
    theta: &[f64],
    k: &SirConstants,
    cache_size: usize,
    list_size: usize,
) -> f64 {
    let options = subsets(pop.n_contents(), list_size);
    let n_u = pop.n_users();
    let mut idx = vec![0usize; n_u];
    let mut best = f64::NEG_INFINITY;
    loop {
        let lists: Vec<Vec<usize>> = idx.iter().map(|&i| options[i].clone()).collect();
        let rec = RecommendationPolicy::new(lists, list_size, pop.n_contents()).unwrap();
        let pi = popularity_after_rec(&rec, theta, pop).unwrap();
        let c = optimal_caching(&pi, k, cache_size, 1e-12).unwrap();
        best = best.max(objective_from_popularity(c.probs(), &pi, k));
        // odometer
        let mut u = 0;
        loop {
            if u == n_u {
                return best;
            }
            idx[u] += 1;
            if idx[u] < options.len() {
                break;
            }
            idx[u] = 0;
            u += 1;
        }
    }
}

/// Probability vector of length `n`; some entries zeroed when `sparse`.
pub fn random_distribution<R: Rng>(n: usize, sparse: bool, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                if sparse && rng.random::<f64>() < 0.2 {
                    0.0
                } else {
                    -x.ln()
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            return v;
        }
    }
}

pub fn random_population<R: Rng>(n_users: usize, n_contents: usize, rng: &mut R) -> UserPopulation {
    let activity = random_distribution(n_users, false, rng);
    let rows = (0..n_users).map(|_| random_distribution(n_contents, false, rng)).collect();
    UserPopulation::new(activity, rows).unwrap()
}

/// Random feasible caching vector: a random direction scaled to a random
/// fraction of the budget, then clamped to 1. Every fourth draw is a
/// deterministic 0/1 placement instead.
pub fn random_feasible_caching<R: Rng>(n: usize, cache_size: usize, rng: &mut R) -> Vec<f64> {
    if rng.random::<f64>() < 0.25 {
        let mut idx: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), rng);
        let mut c = vec![0.0; n];
        for &f in idx.iter().take(cache_size.min(n)) {
            c[f] = 1.0;
        }
        return c;
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(2)).collect();
    let s: f64 = raw.iter().sum();
    let budget = cache_size as f64 * rng.random::<f64>().sqrt();
    raw.iter().map(|x| (x / s * budget).min(1.0)).collect()
}

/// Normal quantile-free two-sided check: `|x - mean| <= z sd`.
pub fn within_sigma(x: f64, mean: f64, sd: f64, z: f64) -> bool {
    (x - mean).abs() <= z * sd
}
