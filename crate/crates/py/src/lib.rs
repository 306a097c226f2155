//! Python bindings. Network parameters are passed as `(g1, g2)` pairs
//! obtained from `sir_constants`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use recache::baselines::all_baselines;
use recache::catalog::{estimate_from_log, top_k_filter, RequestLog};
use recache::netsim::DropConfig;
use recache::recopt::JointPolicy;
use recache::sgeom::{NetworkParams, SirConstants};

fn err(e: recache::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn constants(g1: f64, g2: f64) -> PyResult<SirConstants> {
    SirConstants::new(g1, g2).map_err(err)
}

/// `(g1, g2)` for the given network.
#[pyfunction]
#[pyo3(signature = (lambda_=1.0, n_antennas=2, alpha=3.76, gamma_db=-8.0))]
fn sir_constants(lambda_: f64, n_antennas: u32, alpha: f64, gamma_db: f64) -> PyResult<(f64, f64)> {
    let p = NetworkParams::with_threshold_db(lambda_, n_antennas, alpha, gamma_db).map_err(err)?;
    let k = recache::sgeom::sir_constants(&p).map_err(err)?;
    Ok((k.g1, k.g2))
}

#[pyfunction]
fn offload_success_prob(c: f64, g1: f64, g2: f64) -> PyResult<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(PyValueError::new_err("caching probability must lie in [0, 1]"));
    }
    Ok(recache::sgeom::offload_success_prob(c, &constants(g1, g2)?))
}

#[pyfunction]
#[pyo3(signature = (popularity, cache_size, g1, g2, tol=1e-9))]
fn optimal_caching(popularity: Vec<f64>, cache_size: usize, g1: f64, g2: f64, tol: f64) -> PyResult<Vec<f64>> {
    let c = recache::optimal_caching(&popularity, &constants(g1, g2)?, cache_size, tol).map_err(err)?;
    Ok(c.probs().to_vec())
}

#[pyfunction]
fn post_rec_preference(list: Vec<usize>, theta: f64, preference: Vec<f64>, list_size: usize) -> PyResult<Vec<f64>> {
    recache::demand::post_rec_preference(&list, theta, &preference, list_size).map_err(err)
}

#[pyfunction]
fn convergence_bound(epsilon: f64, n_contents: usize, list_size: usize, rho: f64, requests: f64) -> PyResult<f64> {
    recache::learner::convergence_bound(epsilon, n_contents, list_size, rho, requests).map_err(err)
}

/// Activity levels and inherent preference rows of a user population.
#[pyclass(frozen)]
struct Population {
    inner: recache::UserPopulation,
    user_ids: Option<Vec<String>>,
    content_ids: Option<Vec<String>>,
}

#[pymethods]
impl Population {
    #[new]
    #[pyo3(signature = (activity, preference, thresholds=None))]
    fn new(activity: Vec<f64>, preference: Vec<Vec<f64>>, thresholds: Option<Vec<f64>>) -> PyResult<Self> {
        let mut inner = recache::UserPopulation::new(activity, preference).map_err(err)?;
        if let Some(t) = thresholds {
            inner = inner.with_thresholds(t).map_err(err)?;
        }
        Ok(Self { inner, user_ids: None, content_ids: None })
    }

    /// Estimates a population from a `user,content,count` log, keeping the
    /// most active users and most played contents.
    #[staticmethod]
    fn from_log(path: &str, n_users: usize, n_contents: usize) -> PyResult<Self> {
        let log = RequestLog::from_path(path).map_err(err)?;
        let est = estimate_from_log(&top_k_filter(&log, n_users, n_contents).map_err(err)?).map_err(err)?;
        Ok(Self { inner: est.population, user_ids: Some(est.user_ids), content_ids: Some(est.content_ids) })
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    #[getter]
    fn n_contents(&self) -> usize {
        self.inner.n_contents()
    }

    #[getter]
    fn activity(&self) -> Vec<f64> {
        self.inner.activity().to_vec()
    }

    #[getter]
    fn preference(&self) -> Vec<Vec<f64>> {
        self.inner.preference().to_vec()
    }

    #[getter]
    fn thresholds(&self) -> Option<Vec<f64>> {
        self.inner.thresholds().map(<[f64]>::to_vec)
    }

    #[getter]
    fn user_ids(&self) -> Option<Vec<String>> {
        self.user_ids.clone()
    }

    #[getter]
    fn content_ids(&self) -> Option<Vec<String>> {
        self.content_ids.clone()
    }

    fn inherent_popularity(&self) -> Vec<f64> {
        self.inner.inherent_popularity()
    }

    fn __repr__(&self) -> String {
        format!("Population(n_users={}, n_contents={})", self.inner.n_users(), self.inner.n_contents())
    }
}

fn thresholds_for(pop: &Population, thresholds: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    thresholds
        .or_else(|| pop.inner.thresholds().map(<[f64]>::to_vec))
        .ok_or_else(|| PyValueError::new_err("thresholds required"))
}

fn policy_dict<'py>(py: Python<'py>, p: &JointPolicy) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("lists", p.recommendation.as_ref().map(|r| r.lists().to_vec()))?;
    d.set_item("caching", p.caching.probs().to_vec())?;
    d.set_item("objective", p.achieved_objective)?;
    Ok(d)
}

/// Greedy joint recommendation and caching. Returns a dict with `lists`,
/// `caching` and `objective`.
#[pyfunction]
#[pyo3(signature = (population, cache_size, list_size, g1, g2, thresholds=None, tol=1e-9))]
#[allow(clippy::too_many_arguments)]
fn greedy_joint<'py>(
    py: Python<'py>,
    population: &Population,
    cache_size: usize,
    list_size: usize,
    g1: f64,
    g2: f64,
    thresholds: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let theta = thresholds_for(population, thresholds)?;
    let k = constants(g1, g2)?;
    let p = recache::recopt::greedy_joint(&population.inner, &theta, &k, cache_size, list_size, tol).map_err(err)?;
    policy_dict(py, &p)
}

/// The four comparison policies in order, as dicts like `greedy_joint`.
#[pyfunction]
#[pyo3(signature = (population, cache_size, list_size, g1, g2, thresholds=None, tol=1e-9))]
#[allow(clippy::too_many_arguments)]
fn baselines<'py>(
    py: Python<'py>,
    population: &Population,
    cache_size: usize,
    list_size: usize,
    g1: f64,
    g2: f64,
    thresholds: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let theta = thresholds_for(population, thresholds)?;
    let k = constants(g1, g2)?;
    all_baselines(&population.inner, &theta, &k, cache_size, list_size, tol)
        .map_err(err)?
        .iter()
        .map(|p| policy_dict(py, p))
        .collect()
}

/// Monte Carlo offload probability. Returns `(probability, std_error)`.
#[pyfunction]
#[pyo3(signature = (caching_prob, n_drops, seed=0, lambda_=1.0, n_antennas=2, alpha=3.76, gamma_db=-8.0))]
fn simulate_offload(
    py: Python<'_>,
    caching_prob: f64,
    n_drops: usize,
    seed: u64,
    lambda_: f64,
    n_antennas: u32,
    alpha: f64,
    gamma_db: f64,
) -> PyResult<(f64, f64)> {
    let p = NetworkParams::with_threshold_db(lambda_, n_antennas, alpha, gamma_db).map_err(err)?;
    let cfg = DropConfig::new(p, caching_prob, n_drops, seed).map_err(err)?;
    let out = py.detach(|| recache::netsim::simulate_offload(&cfg)).map_err(err)?;
    Ok((out.probability, out.std_error))
}

#[pymodule]
fn recache_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Population>()?;
    m.add_function(wrap_pyfunction!(sir_constants, m)?)?;
    m.add_function(wrap_pyfunction!(offload_success_prob, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_caching, m)?)?;
    m.add_function(wrap_pyfunction!(post_rec_preference, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_bound, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_joint, m)?)?;
    m.add_function(wrap_pyfunction!(baselines, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_offload, m)?)?;
    Ok(())
}
