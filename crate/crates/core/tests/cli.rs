mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use recache::cli::ExperimentConfig;

const SMALL: &str = r#"
seed = 7

[sizes]
n_users = 8
n_contents = 20
cache_size = 3
cache_sizes = [1, 3, 20]
list_size = 2

[learner]
schedules = ["0", "0.1", "1/t"]
n_slots = 40
requests_per_slot = 50
bound_epsilon = 0.2
bound_runs = 4
bound_max_slots = 400

[validation]
caching_probs = [0.0, 0.5, 1.0]
n_drops = 3000
sir_thresholds_db = [-10.0, 0.0, 5.0]

[solver]
theta_points = 5
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_recache"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(csv_text: &str) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records()
        .map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn f(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("{key}={}", row[key]))
}

/// Runs a subcommand on the small config and returns its CSV.
fn small(cmd: &str, extra: &[&str]) -> (Output, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out.csv");
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (o, text)
}

fn check_fixture(name: &str, text: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    if std::env::var_os("RECACHE_UPDATE_FIXTURES").is_some() {
        std::fs::write(&path, text).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing fixture {}", path.display()));
    assert!(want == text, "{name} differs from its fixture");
}

#[test]
fn config_round_trip() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(cfg, again);

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "small.toml", SMALL);
    let o = run(&["print-config", "--config", path.to_str().unwrap(), "--cache-size", "5", "--gamma-db", "-6"]);
    assert!(o.status.success());
    let printed = String::from_utf8(o.stdout).unwrap();
    let parsed = ExperimentConfig::from_toml(&printed).unwrap();
    assert_eq!(parsed.sizes.cache_size, 5);
    assert_eq!(parsed.network.sir_threshold_db, -6.0);
    assert_eq!(parsed.sizes.n_contents, 20);
    let reprinted = write(dir.path(), "again.toml", &printed);
    let o2 = run(&["print-config", "--config", reprinted.to_str().unwrap()]);
    assert_eq!(String::from_utf8(o2.stdout).unwrap(), printed);
}

#[test]
fn bad_configs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.toml", "[sizes]\nn_userz = 3\n");
    let o = run(&["sweep-cache-size", "--config", unknown.to_str().unwrap()]);
    assert!(!o.status.success());
    let invalid = write(dir.path(), "i.toml", "[network]\npathloss_alpha = 1.5\n");
    let o = run(&["sweep-cache-size", "--config", invalid.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    let o = run(&["learn", "--list-size", "0"]);
    assert!(!o.status.success());
}

#[test]
fn validate_sir_rows() {
    let (o, text) = small("validate-sir", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&text);
    assert_eq!(rows.len(), 3 + 3);
    let zero = &rows[0];
    assert_eq!(f(zero, "c_f"), 0.0);
    assert_eq!((f(zero, "analytic"), f(zero, "empirical"), f(zero, "std_err")), (0.0, 0.0, 0.0));
    assert_eq!(zero["within_tolerance"], "true");
    assert!(rows.iter().all(|r| r["within_tolerance"] == "true"));
    // threshold sweep at full caching against the quadrature integrals
    for r in rows.iter().filter(|r| f(r, "gamma0_db") != -8.0) {
        assert_eq!(f(r, "c_f"), 1.0);
        let g0 = 10f64.powf(f(r, "gamma0_db") / 10.0);
        let (g1, g2) = common::sir_constants_by_quadrature(3.76, 2, g0);
        assert!((f(r, "analytic") - 1.0 / (g1 + g2)).abs() < 1e-9);
    }
    check_fixture("validate-sir.csv", &text);
}

#[test]
fn sweep_cache_size_rows() {
    let (o, text) = small("sweep-cache-size", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&text);
    assert_eq!(rows.iter().map(|r| f(r, "n_c")).collect::<Vec<_>>(), vec![1.0, 3.0, 20.0]);
    let ceiling = {
        let (g1, g2) = common::sir_constants_by_quadrature(3.76, 2, 10f64.powf(-0.8));
        1.0 / (g1 + g2)
    };
    for r in &rows {
        for col in ["alg1", "baseline1", "baseline2", "baseline3", "baseline4"] {
            assert!((0.0..=ceiling + 1e-12).contains(&f(r, col)), "{col}");
        }
    }
    let full = rows.last().unwrap();
    for col in ["alg1", "baseline1", "baseline2", "baseline3", "baseline4"] {
        assert!((f(full, col) - ceiling).abs() < 1e-9, "{col}");
    }
    check_fixture("sweep-cache-size.csv", &text);
}

#[test]
fn sweep_threshold_rows() {
    let (o, text) = small("sweep-threshold", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&text);
    assert_eq!(rows.len(), 5);
    let b4: Vec<&String> = rows.iter().map(|r| &r["baseline4"]).collect();
    assert!(b4.iter().all(|v| *v == b4[0]));
    let theta: Vec<f64> = rows.iter().map(|r| f(r, "theta_max")).collect();
    assert!(theta.windows(2).all(|w| w[1] > w[0]));
    // recommendation stops helping once thresholds exceed every preference
    let last = rows.last().unwrap();
    assert!((f(last, "alg1") - f(last, "baseline4")).abs() < 1e-9);
    assert!(f(&rows[0], "alg1") > f(last, "alg1"));
    check_fixture("sweep-threshold.csv", &text);
}

#[test]
fn learn_rows() {
    let (o, text) = small("learn", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&text);
    assert_eq!(rows.len(), 3 * 40);
    let oracle: Vec<&String> = rows.iter().map(|r| &r["oracle_objective"]).collect();
    assert!(oracle.iter().all(|v| *v == oracle[0]));
    for r in rows.iter().filter(|r| r["schedule"] == "0") {
        assert_eq!(r["mode"], "exploit");
    }
    let first = rows.iter().find(|r| r["schedule"] == "1/t").unwrap();
    assert_eq!((f(first, "epsilon"), first["mode"].as_str()), (1.0, "explore"));
    check_fixture("learn.csv", &text);
}

#[test]
fn bound_rows() {
    let (o, text) = small("bound", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&text);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        if r["bound"].is_empty() {
            assert_eq!(r["within_bound"], "n/a");
            continue;
        }
        let requests = f(r, "requests_per_slot");
        let want = recache::learner::convergence_bound(0.2, 20, 2, f(r, "rho"), requests).unwrap();
        assert!((f(r, "bound") - want).abs() <= 1e-9 * want);
        assert_eq!(r["within_bound"], if f(r, "mean_convergence_slot") <= want { "true" } else { "false" });
    }
    check_fixture("bound.csv", &text);
}

#[test]
fn outputs_are_deterministic() {
    for cmd in ["sweep-cache-size", "learn"] {
        let (_, a) = small(cmd, &[]);
        let (_, b) = small(cmd, &[]);
        assert_eq!(a, b);
        let (_, c) = small(cmd, &["--seed", "8"]);
        assert_ne!(a, c);
    }
}

#[test]
fn out_dir_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let target = dir.path().join("results");
    let o = run(&["sweep-threshold", "--config", cfg.to_str().unwrap(), "--out-dir", target.to_str().unwrap()]);
    assert!(o.status.success());
    let from_dir = std::fs::read_to_string(target.join("sweep_threshold.csv")).unwrap();
    let o = run(&["sweep-threshold", "--config", cfg.to_str().unwrap()]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), from_dir);
}

#[test]
fn exploitation_only_stalls_below_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "plays.csv", "A,a,6\nA,b,3\nA,c,1\n");
    let cfg = write(
        dir.path(),
        "stall.toml",
        &format!(
            "[sizes]\nn_users = 1\nn_contents = 3\ncache_size = 1\nlist_size = 1\n\
             [thresholds]\nvalues = [0.05]\n\
             [dataset]\npath = {:?}\n\
             [learner]\nschedules = [\"0\", \"1/t\"]\nn_slots = 300\nrequests_per_slot = 100\n",
            log.to_str().unwrap()
        ),
    );
    let out = dir.path().join("learn.csv");
    let o = run(&["learn", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&std::fs::read_to_string(out).unwrap());
    let stalled: Vec<_> = rows.iter().filter(|r| r["schedule"] == "0").collect();
    let last = stalled.last().unwrap();
    assert_eq!(f(last, "fraction_users_converged"), 0.0);
    assert!(stalled.iter().all(|r| f(r, "objective_true_theta") <= f(r, "oracle_objective") + 1e-12));
    let explored = rows.iter().filter(|r| r["schedule"] == "1/t").last().unwrap();
    assert_eq!(f(explored, "fraction_users_converged"), 1.0);
}

#[test]
fn inverse_time_schedule_has_best_tail() {
    let config = "[sizes]\nn_users = 10\nn_contents = 30\ncache_size = 4\nlist_size = 3\n\
                  [learner]\nschedules = [\"0\", \"0.01\", \"0.1\", \"1/t\"]\nn_slots = 300\nrequests_per_slot = 100\n";
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tail.toml", config);
    let mut tail: BTreeMap<String, f64> = BTreeMap::new();
    let seeds = 6;
    for seed in 1..=seeds {
        let out = dir.path().join(format!("l{seed}.csv"));
        let s = seed.to_string();
        let o = run(&["learn", "--config", cfg.to_str().unwrap(), "--seed", &s, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        for r in rows(&std::fs::read_to_string(out).unwrap()) {
            if f(&r, "slot") > 150.0 {
                *tail.entry(r["schedule"].clone()).or_default() += f(&r, "objective_true_theta");
            }
        }
    }
    let best = tail["1/t"];
    for (s, v) in &tail {
        assert!(best >= *v, "schedule {s} tail {v} beats 1/t {best}");
    }
}

#[test]
fn ingest_estimates_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "plays.tsv", "u1\ta\t2\nu1\tb\t1\nu1\tc\t1\nu2\ta\t4\nu3\tb\t1\n");
    let out = dir.path().join("ingest.csv");
    let o = run(&[
        "ingest",
        "--dataset",
        log.to_str().unwrap(),
        "--users",
        "2",
        "--contents",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rows(&std::fs::read_to_string(out).unwrap());
    let get = |u: &str, c: &str| rows.iter().find(|r| r["user_id"] == u && r["content_id"] == c).map(|r| (f(r, "activity"), f(r, "preference")));
    assert_eq!(get("u1", "a"), Some((0.5, 0.5)));
    assert_eq!(get("u1", "b"), Some((0.5, 0.25)));
    assert_eq!(get("u2", "a"), Some((0.5, 1.0)));
    assert!(rows.iter().all(|r| r["user_id"] != "u3"));
    let o = run(&["ingest", "--dataset", dir.path().join("missing.csv").to_str().unwrap()]);
    assert!(!o.status.success());
}
