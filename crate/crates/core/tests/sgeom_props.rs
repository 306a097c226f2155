mod common;

use proptest::prelude::*;
use rand::Rng;
use recache::catalog::UserPopulation;
use recache::demand::{post_rec_preference, RecommendationPolicy};
use recache::sgeom::{
    gamma, gauss_2f1, ln_gamma, objective, objective_from_popularity, offload_success_prob, sir_constants,
    NetworkParams, SirConstants,
};

/// `ln Gamma(x)` to 20 significant digits from an arbitrary precision library.
const LN_GAMMA_TABLE: [(f64, f64); 12] = [
    (0.001, 6.9071788853838536825),
    (0.1, 2.2527126517342059599),
    (0.5, 0.57236494292470008707),
    (0.9, 0.066376239734742971189),
    (1.5, -0.12078223763524522235),
    (2.5, 0.28468287047291915963),
    (3.2, 0.88540482715490894595),
    (7.7, 7.9265413562690044281),
    (12.25, 18.115669505710892619),
    (25.0, 54.78472939811231919),
    (49.5, 142.6172828211459826),
    (50.0, 144.56574394634488601),
];

fn constants(alpha: f64, nt: u32, gamma0: f64) -> SirConstants {
    sir_constants(&NetworkParams::new(1.0, nt, alpha, gamma0).unwrap()).unwrap()
}

fn default_constants() -> SirConstants {
    constants(3.76, 2, 10f64.powf(-0.8))
}

#[test]
fn ln_gamma_matches_reference_table() {
    for (x, want) in LN_GAMMA_TABLE {
        let got = ln_gamma(x).unwrap();
        assert!(((got - want) / want).abs() <= 1e-12, "x={x}: {got} vs {want}");
    }
    assert!(ln_gamma(1.0).unwrap().abs() < 1e-15);
    assert!((ln_gamma(4.0).unwrap() - 6f64.ln()).abs() < 1e-14);
    assert!(ln_gamma(0.0).is_err());
    assert!(ln_gamma(-1.5).is_err());
}

#[test]
fn ln_gamma_recurrence() {
    let mut x = 0.05;
    while x < 49.0 {
        let lhs = ln_gamma(x + 1.0).unwrap();
        let rhs = ln_gamma(x).unwrap() + x.ln();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "x={x}");
        x += 0.37;
    }
    assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
}

#[test]
fn hypergeometric_examples() {
    assert_eq!(gauss_2f1(-0.3, 2.0, 0.7, 0.0).unwrap(), 1.0);
    assert!((gauss_2f1(0.0, 2.0, 0.7, -0.4).unwrap() - 1.0).abs() < 1e-15);
    // 2F1(1, 1; 2; z) = -ln(1 - z) / z
    for z in [-0.9f64, -0.6, -0.3, -0.05] {
        let want = -(-z).ln_1p() / z;
        assert!((gauss_2f1(1.0, 1.0, 2.0, z).unwrap() - want).abs() < 1e-12, "z={z}");
    }
    // 2F1(a, b; b; z) = (1 - z)^-a
    for z in [-0.95f64, -0.5, -0.1] {
        let want = (1.0 - z).powf(0.4);
        assert!((gauss_2f1(-0.4, 1.3, 1.3, z).unwrap() - want).abs() < 1e-12);
    }
    assert!(gauss_2f1(1.0, 1.0, 2.0, 1.0).is_err());
    assert!(gauss_2f1(1.0, 1.0, -2.0, 0.1).is_err());
}

#[test]
fn hypergeometric_against_radial_integral() {
    // 2F1(-2/a, N_t; 1-2/a; -g) = 1 + 2 int_1^inf (1 - (1 + g s^-a)^-N_t) s ds
    let (alpha, nt, g0) = (3.76, 2u32, 10f64.powf(-0.8));
    let (g1, g2) = common::sir_constants_by_quadrature(alpha, nt, g0);
    let i1 = g1 + g2 - 1.0;
    let got = gauss_2f1(-2.0 / alpha, nt as f64, 1.0 - 2.0 / alpha, -g0).unwrap();
    assert!((got - (1.0 + i1)).abs() <= 1e-10, "{got} vs {}", 1.0 + i1);
}

#[test]
fn constants_match_quadrature_grid() {
    for alpha in [3.0, 3.76, 4.0] {
        for nt in [1u32, 2, 4] {
            for g0 in [0.05, 0.158, 1.0, 5.0] {
                let k = constants(alpha, nt, g0);
                let (q1, q2) = common::sir_constants_by_quadrature(alpha, nt, g0);
                assert!(((k.g1 - q1) / q1).abs() <= 1e-8, "G1 a={alpha} nt={nt} g={g0}: {} vs {q1}", k.g1);
                assert!(((k.g2 - q2) / q2).abs() <= 1e-8, "G2 a={alpha} nt={nt} g={g0}: {} vs {q2}", k.g2);
                assert!(k.g1 > 0.0 && k.g2 > 0.0);
                assert!(offload_success_prob(1.0, &k) <= 1.0);
            }
        }
    }
}

#[test]
fn constants_examples() {
    let k = default_constants();
    let (q1, q2) = common::sir_constants_by_quadrature(3.76, 2, 10f64.powf(-0.8));
    assert!(((k.g1 - q1) / q1).abs() <= 1e-8);
    assert!(((k.g2 - q2) / q2).abs() <= 1e-8);
    // alpha = 4, N_t = 1: G2 = (pi / 2) sqrt(gamma0)
    for g0 in [0.01, 0.3, 2.0] {
        let k = constants(4.0, 1, g0);
        let want = std::f64::consts::PI / 2.0 * g0.sqrt();
        assert!(((k.g2 - want) / want).abs() < 1e-12);
    }
    // small threshold limit at alpha = 3
    let k = constants(3.0, 2, 1e-12);
    assert!((k.g1 - 1.0).abs() <= 1e-6);
    assert!(k.g2 <= 1e-6);
    assert!(NetworkParams::new(1.0, 2, 2.0, 0.1).is_err());
    assert!(NetworkParams::new(1.0, 0, 3.0, 0.1).is_err());
    assert!(NetworkParams::new(1.0, 2, 3.0, 0.0).is_err());
}

#[test]
fn success_probability_examples() {
    let k = default_constants();
    assert_eq!(offload_success_prob(0.0, &k), 0.0);
    assert!((offload_success_prob(1.0, &k) - 1.0 / (k.g1 + k.g2)).abs() < 1e-15);
    assert!((offload_success_prob(1.0, &k) - k.full_cache_prob()).abs() < 1e-15);
}

#[test]
fn success_probability_monotone_on_fine_grid() {
    let mut rng = common::rng(5);
    for _ in 0..50 {
        let k = constants(rng.random_range(2.2..5.0), rng.random_range(1..6), 10f64.powf(rng.random_range(-2.0..1.0)));
        let mut prev = -1.0;
        for i in 0..=1000 {
            let p = offload_success_prob(i as f64 / 1000.0, &k);
            assert!(p >= prev && (0.0..=1.0).contains(&p));
            prev = p;
        }
    }
}

#[test]
fn objective_examples() {
    let k = default_constants();
    let p = vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8]];
    let pop = UserPopulation::new(vec![0.6, 0.4], p.clone()).unwrap();
    let rec = RecommendationPolicy::new(vec![vec![0, 1], vec![1, 2]], 2, 3).unwrap();
    let theta = [0.25, 0.05];
    assert_eq!(objective(&[0.0; 3], &rec, &theta, &pop, &k).unwrap(), 0.0);
    let full = objective(&[1.0; 3], &rec, &theta, &pop, &k).unwrap();
    assert!((full - 1.0 / (k.g1 + k.g2)).abs() < 1e-12);
    // c = (1, 0.5, 0), summed by hand over q rows
    let c = [1.0, 0.5, 0.0];
    let q0 = post_rec_preference(&[0, 1], 0.25, &p[0], 2).unwrap();
    let q1 = post_rec_preference(&[1, 2], 0.05, &p[1], 2).unwrap();
    let s1 = 1.0 / (k.g1 + k.g2);
    let s05 = 0.5 / (0.5 * k.g1 + k.g2);
    let want = 0.6 * (q0[0] * s1 + q0[1] * s05) + 0.4 * (q1[0] * s1 + q1[1] * s05);
    let got = objective(&c, &rec, &theta, &pop, &k).unwrap();
    assert!((got - want).abs() < 1e-14);
    assert!(objective(&[1.0; 2], &rec, &theta, &pop, &k).is_err());
}

proptest! {
    #[test]
    fn objective_is_concave_in_caching(seed in any::<u64>(), lam in 0.01f64..0.99, n_f in 2usize..20) {
        let mut rng = common::rng(seed);
        let k = constants(rng.random_range(2.5..4.5), rng.random_range(1..5), 10f64.powf(rng.random_range(-1.5..0.7)));
        let pi = common::random_distribution(n_f, true, &mut rng);
        let n_c = rng.random_range(1..=n_f);
        let a = common::random_feasible_caching(n_f, n_c, &mut rng);
        let b = common::random_feasible_caching(n_f, n_c, &mut rng);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
        let lhs = objective_from_popularity(&mix, &pi, &k);
        let rhs = lam * objective_from_popularity(&a, &pi, &k) + (1.0 - lam) * objective_from_popularity(&b, &pi, &k);
        prop_assert!(lhs >= rhs - 1e-12);
        prop_assert!((0.0..=k.full_cache_prob() + 1e-15).contains(&lhs));
    }

    #[test]
    fn closed_form_matches_direct_evaluation(seed in any::<u64>(), n_f in 1usize..30) {
        let mut rng = common::rng(seed);
        let k = default_constants();
        let pi = common::random_distribution(n_f, true, &mut rng);
        let c: Vec<f64> = (0..n_f).map(|_| rng.random()).collect();
        let got = objective_from_popularity(&c, &pi, &k);
        prop_assert!((got - common::caching_value(&c, &pi, &k)).abs() <= 1e-14);
    }
}
