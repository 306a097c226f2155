//! Contents, users, and ingestion of play-count logs.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::{check_distribution, NORM_TOL};

/// The content catalog. Feature vectors are optional; when present every
/// content carries a vector of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    n_contents: usize,
    features: Option<Vec<Vec<f64>>>,
}

impl Catalog {
    pub fn new(n_contents: usize) -> Result<Self> {
        if n_contents == 0 {
            return Err(Error::InvalidInput("catalog must hold at least one content".into()));
        }
        Ok(Self { n_contents, features: None })
    }

    pub fn with_features(features: Vec<Vec<f64>>) -> Result<Self> {
        let k = uniform_dimension(&features, "content features")?;
        if features.is_empty() || k == 0 {
            return Err(Error::InvalidInput("content features must be nonempty with K >= 1".into()));
        }
        Ok(Self { n_contents: features.len(), features: Some(features) })
    }

    pub fn n_contents(&self) -> usize {
        self.n_contents
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }
}

fn uniform_dimension(rows: &[Vec<f64>], what: &str) -> Result<usize> {
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidInput(format!("{what}: rows have differing dimensions")));
    }
    Ok(k)
}

/// Users: activity levels `v`, the inherent preference matrix `P` (one row
/// per user), and optionally ground-truth thresholds and feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPopulation {
    activity: Vec<f64>,
    preference: Vec<Vec<f64>>,
    thresholds: Option<Vec<f64>>,
    features: Option<Vec<Vec<f64>>>,
}

impl UserPopulation {
    pub fn new(activity: Vec<f64>, preference: Vec<Vec<f64>>) -> Result<Self> {
        if activity.is_empty() {
            return Err(Error::InvalidInput("population must hold at least one user".into()));
        }
        if activity.len() != preference.len() {
            return Err(Error::InvalidInput(format!(
                "{} activity levels for {} preference rows",
                activity.len(),
                preference.len()
            )));
        }
        check_distribution(&activity, "activity vector")?;
        let n_f = uniform_dimension(&preference, "preference matrix")?;
        if n_f == 0 {
            return Err(Error::InvalidInput("preference rows are empty".into()));
        }
        for (u, row) in preference.iter().enumerate() {
            check_distribution(row, &format!("preference row {u}"))?;
        }
        Ok(Self { activity, preference, thresholds: None, features: None })
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != self.n_users() {
            return Err(Error::InvalidInput(format!(
                "{} thresholds for {} users",
                thresholds.len(),
                self.n_users()
            )));
        }
        if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("thresholds must lie in [0, 1]".into()));
        }
        self.thresholds = Some(thresholds);
        Ok(self)
    }

    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.n_users() {
            return Err(Error::InvalidInput("one feature vector per user required".into()));
        }
        let k = uniform_dimension(&features, "user features")?;
        if k == 0 {
            return Err(Error::InvalidInput("user features must have K >= 1".into()));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn n_users(&self) -> usize {
        self.activity.len()
    }

    pub fn n_contents(&self) -> usize {
        self.preference[0].len()
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn preference(&self) -> &[Vec<f64>] {
        &self.preference
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.preference[u]
    }

    pub fn thresholds(&self) -> Option<&[f64]> {
        self.thresholds.as_deref()
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }

    /// Inherent content popularity `sum_u v_u p_uf`.
    pub fn inherent_popularity(&self) -> Vec<f64> {
        let mut pop = vec![0.0; self.n_contents()];
        for (v, row) in self.activity.iter().zip(&self.preference) {
            for (acc, p) in pop.iter_mut().zip(row) {
                *acc += v * p;
            }
        }
        pop
    }
}

/// One `(user, content, play count)` triplet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Play {
    pub user: String,
    pub content: String,
    pub count: u64,
}

/// A play-count log: `user<sep>content<sep>count` per line, where `<sep>`
/// is a tab or a comma.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RequestLog {
    pub plays: Vec<Play>,
}

impl RequestLog {
    pub fn new(plays: Vec<Play>) -> Self {
        Self { plays }
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut plays = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let sep = if line.contains('\t') { '\t' } else { ',' };
            let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let count = fields[2].parse::<u64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("play count {:?}: {e}", fields[2]),
            })?;
            plays.push(Play { user: fields[0].to_string(), content: fields[1].to_string(), count });
        }
        Ok(Self { plays })
    }

    fn distinct<'a>(&'a self, key: impl Fn(&'a Play) -> &'a str) -> usize {
        let mut seen: Vec<&str> = self.plays.iter().map(key).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Ranks ids by descending total, ties by ascending id, and keeps the first `k`.
fn top_ids<'a>(totals: HashMap<&'a str, u64>, k: usize) -> Vec<&'a str> {
    let mut ranked: Vec<(&str, u64)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Keeps the `k_users` most active users and, among their plays, the
/// `k_contents` most played contents.
pub fn top_k_filter(log: &RequestLog, k_users: usize, k_contents: usize) -> Result<RequestLog> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if k_users == 0 || k_contents == 0 {
        return Err(Error::InvalidInput("k_users and k_contents must be >= 1".into()));
    }
    let n_users = log.distinct(|p| &p.user);
    if n_users < k_users {
        return Err(Error::Shortfall { what: "users", requested: k_users, available: n_users });
    }
    let mut user_totals: HashMap<&str, u64> = HashMap::new();
    for p in &log.plays {
        *user_totals.entry(&p.user).or_default() += p.count;
    }
    let kept_users: std::collections::HashSet<&str> =
        top_ids(user_totals, k_users).into_iter().collect();

    let mut content_totals: HashMap<&str, u64> = HashMap::new();
    for p in log.plays.iter().filter(|p| kept_users.contains(p.user.as_str())) {
        *content_totals.entry(&p.content).or_default() += p.count;
    }
    if content_totals.len() < k_contents {
        return Err(Error::Shortfall {
            what: "contents",
            requested: k_contents,
            available: content_totals.len(),
        });
    }
    let kept_contents: std::collections::HashSet<&str> =
        top_ids(content_totals, k_contents).into_iter().collect();

    let plays = log
        .plays
        .iter()
        .filter(|p| kept_users.contains(p.user.as_str()) && kept_contents.contains(p.content.as_str()))
        .cloned()
        .collect();
    Ok(RequestLog { plays })
}

/// Output of [`estimate_from_log`]. Dense indices follow first-seen order.
#[derive(Debug, Clone)]
pub struct LogEstimate {
    pub population: UserPopulation,
    pub catalog: Catalog,
    pub user_ids: Vec<String>,
    pub content_ids: Vec<String>,
}

/// Estimates preferences as per-user play ratios and activity as each
/// user's share of all plays.
pub fn estimate_from_log(log: &RequestLog) -> Result<LogEstimate> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut content_index: HashMap<&str, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut content_ids = Vec::new();
    for p in &log.plays {
        user_index.entry(&p.user).or_insert_with(|| {
            user_ids.push(p.user.clone());
            user_ids.len() - 1
        });
        content_index.entry(&p.content).or_insert_with(|| {
            content_ids.push(p.content.clone());
            content_ids.len() - 1
        });
    }
    let mut counts = vec![vec![0u64; content_ids.len()]; user_ids.len()];
    for p in &log.plays {
        counts[user_index[p.user.as_str()]][content_index[p.content.as_str()]] += p.count;
    }
    let totals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    if let Some(u) = totals.iter().position(|&t| t == 0) {
        return Err(Error::ZeroActivityUser(user_ids[u].clone()));
    }
    let grand: u64 = totals.iter().sum();
    let activity = totals.iter().map(|&t| t as f64 / grand as f64).collect();
    let preference = counts
        .iter()
        .zip(&totals)
        .map(|(row, &t)| row.iter().map(|&c| c as f64 / t as f64).collect())
        .collect();
    Ok(LogEstimate {
        population: UserPopulation::new(activity, preference)?,
        catalog: Catalog::new(content_ids.len())?,
        user_ids,
        content_ids,
    })
}

/// Multinomial-logit preferences `p_uf = exp(x_f . y_u) / sum_f' exp(x_f' . y_u)`.
pub fn softmax_preference(catalog: &Catalog, population: &UserPopulation) -> Result<Vec<Vec<f64>>> {
    let xs = catalog.features().ok_or(Error::MissingFeatures("catalog"))?;
    let ys = population.features().ok_or(Error::MissingFeatures("population"))?;
    softmax_rows(xs, ys)
}

pub(crate) fn softmax_rows(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (kx, ky) = (xs[0].len(), ys[0].len());
    if kx != ky {
        return Err(Error::FeatureDimension { contents: kx, users: ky });
    }
    Ok(ys
        .iter()
        .map(|y| {
            let scores: Vec<f64> =
                xs.iter().map(|x| x.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / z).collect()
        })
        .collect())
}

/// True when `row` is a probability vector within [`NORM_TOL`].
pub fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= NORM_TOL
}
