//! Log-log rate fits of median excess against a sample-size column.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::runner::ResultRow;
use crate::error::{MolError, Result};
use crate::numeric::median;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupCol {
    #[serde(rename = "n")]
    Labeled,
    #[serde(rename = "N")]
    Unlabeled,
}

impl GroupCol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Self::Labeled),
            "N" => Ok(Self::Unlabeled),
            _ => Err(MolError::Config(format!("group column must be `n` or `N`, got `{s}`"))),
        }
    }

    pub fn of(&self, r: &ResultRow) -> usize {
        match self {
            Self::Labeled => r.n,
            Self::Unlabeled => r.big_n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    /// `(size, median excess)` per group.
    pub medians: Vec<(usize, f64)>,
}

/// Least-squares slope of `log(median)` on `log(size)`.
pub fn fit_rate_points(medians: &[(usize, f64)]) -> Result<RateFit> {
    if medians.len() < 4 {
        return Err(MolError::Config(format!("need at least 4 sample sizes, got {}", medians.len())));
    }
    if let Some((n, m)) = medians.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(MolError::Data(format!("non-positive median excess {m} at size {n}")));
    }
    let xs: Vec<f64> = medians.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = medians.iter().map(|(_, m)| m.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let std_error = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, intercept, std_error, medians: medians.to_vec() })
}

/// Groups successful rows by `col` and fits the median excess.
pub fn fit_rate(rows: &[ResultRow], col: GroupCol) -> Result<RateFit> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        groups.entry(col.of(r)).or_default().push(r.excess);
    }
    let medians: Vec<(usize, f64)> = groups.into_iter().map(|(n, v)| (n, median(&v))).collect();
    fit_rate_points(&medians)
}

/// One fit per `(method, scalarization, weights)` series.
pub fn fit_rates(rows: &[ResultRow], col: GroupCol) -> Vec<((String, String, String), Result<RateFit>)> {
    let mut series: BTreeMap<(String, String, String), Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        series.entry((r.method.clone(), r.scalarization.clone(), r.weights.clone())).or_default().push(r.clone());
    }
    series
        .into_iter()
        .map(|(k, v)| {
            let f = fit_rate(&v, col);
            (k, f)
        })
        .collect()
}
