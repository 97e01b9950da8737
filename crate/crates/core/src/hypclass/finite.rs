//! Classes that assign one of finitely many outputs to each point of a finite
//! domain. Parameters are the outputs themselves, one per domain point.

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    pub domain: Vec<Vec<f64>>,
    /// Allowed outputs per domain point, ascending.
    pub outputs: Vec<Vec<f64>>,
}

impl FiniteClass {
    pub fn new(domain: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        if domain.is_empty() || domain.len() != outputs.len() {
            return Err(MolError::Shape("finite class needs one output set per domain point".into()));
        }
        if outputs.iter().any(|o| o.is_empty()) {
            return Err(MolError::Config("empty output set".into()));
        }
        let outputs = outputs
            .into_iter()
            .map(|mut o| {
                o.sort_by(|a, b| a.total_cmp(b));
                o.dedup();
                o
            })
            .collect();
        Ok(Self { domain, outputs })
    }

    /// Every point may take any of `values`.
    pub fn uniform(domain: Vec<Vec<f64>>, values: &[f64]) -> Result<Self> {
        let outputs = vec![values.to_vec(); domain.len()];
        Self::new(domain, outputs)
    }

    /// Binary classifiers on `domain`.
    pub fn binary(domain: Vec<Vec<f64>>) -> Result<Self> {
        Self::uniform(domain, &[0.0, 1.0])
    }

    pub fn index_of(&self, x: &[f64]) -> Result<usize> {
        self.domain.iter().position(|p| p.as_slice() == x).ok_or_else(|| MolError::Domain(format!("{x:?} is not a point of the finite domain")))
    }

    /// Number of functions in the class, saturating.
    pub fn cardinality(&self) -> u128 {
        self.outputs.iter().fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128))
    }

    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.outputs)
            .map(|(v, allowed)| *allowed.iter().min_by(|a, b| (*a - v).abs().total_cmp(&(*b - v).abs())).expect("non-empty output set"))
            .collect()
    }

    pub fn contains(&self, params: &[f64], tol: f64) -> bool {
        params.len() == self.domain.len() && params.iter().zip(&self.outputs).all(|(v, allowed)| allowed.iter().any(|a| (a - v).abs() <= tol))
    }

    /// Calls `f` on every member in lexicographic order of the parameter vector.
    pub fn for_each_member(&self, mut f: impl FnMut(&[f64])) {
        let m = self.domain.len();
        let mut idx = vec![0usize; m];
        let mut params: Vec<f64> = self.outputs.iter().map(|o| o[0]).collect();
        loop {
            f(&params);
            let mut pos = m;
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < self.outputs[pos].len() {
                    params[pos] = self.outputs[pos][idx[pos]];
                    break;
                }
                idx[pos] = 0;
                params[pos] = self.outputs[pos][0];
            }
        }
    }
}
