//! Scalarizations of excess-risk vectors.
//!
//! Both supported kinds satisfy, for all `v, w` and `alpha >= 0`,
//!
//! ```text
//! |s(v) - s(w)| <= s(|v - w|)      s(alpha v) = alpha s(v)
//! ```
//!
//! and are monotone in each coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts non-negative weights summing to one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MolError::Weights("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MolError::Weights(format!("negative or non-finite weight in {weights:?}")));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(MolError::Weights(format!("weights sum to {s}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(MolError::Weights("cannot normalize".into()));
        }
        Self::new(weights.iter().map(|w| w / s).collect()).or_else(|_| {
            let mut w: Vec<f64> = weights.iter().map(|w| w / s).collect();
            let head: f64 = w[..w.len() - 1].iter().sum();
            let last = w.len() - 1;
            w[last] = (1.0 - head).max(0.0);
            Self::new(w)
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Short text form such as `0.25;0.75`.
    pub fn label(&self) -> String {
        self.0.iter().map(|w| format!("{w}")).collect::<Vec<_>>().join(";")
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = MolError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarizationKind {
    #[default]
    Linear,
    Tchebycheff,
}

impl ScalarizationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarizationKind::Linear => "linear",
            ScalarizationKind::Tchebycheff => "tchebycheff",
        }
    }

    /// Combines already weighted terms: sum for linear, max for Tchebycheff.
    pub fn combine(&self, weights: &[f64], values: &[f64]) -> f64 {
        let terms = weights.iter().zip(values).map(|(w, v)| w * v);
        match self {
            ScalarizationKind::Linear => terms.sum(),
            ScalarizationKind::Tchebycheff => terms.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalarization {
    pub kind: ScalarizationKind,
    pub weights: WeightVector,
}

impl Scalarization {
    pub fn new(kind: ScalarizationKind, weights: WeightVector) -> Self {
        Self { kind, weights }
    }

    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(ScalarizationKind::Linear, WeightVector::new(weights)?))
    }

    pub fn tchebycheff(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::new(ScalarizationKind::Tchebycheff, WeightVector::new(weights)?))
    }

    pub fn num_tasks(&self) -> usize {
        self.weights.len()
    }

    pub fn scalarize(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.weights.len() {
            return Err(MolError::Shape(format!("{} values for {} weights", v.len(), self.weights.len())));
        }
        Ok(self.kind.combine(self.weights.as_slice(), v))
    }

    /// Index of the task attaining a Tchebycheff maximum (lowest index on ties).
    pub fn active_task(&self, v: &[f64]) -> usize {
        let w = self.weights.as_slice();
        let mut best = 0;
        for k in 1..v.len() {
            if w[k] * v[k] > w[best] * v[best] {
                best = k;
            }
        }
        best
    }

    pub fn label(&self) -> String {
        self.weights.label()
    }
}

/// Simplex lattice with denominator `m - 1`, ordered lexicographically.
pub fn weight_grid(k: usize, m: usize) -> Result<Vec<WeightVector>> {
    if k < 1 || m < 2 {
        return Err(MolError::Config(format!("weight grid needs K >= 1 and m >= 2, got K={k}, m={m}")));
    }
    let denom = m - 1;
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    fn rec(pos: usize, left: usize, denom: usize, counts: &mut Vec<usize>, out: &mut Vec<WeightVector>) {
        let k = counts.len();
        if pos == k - 1 {
            counts[pos] = left;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / denom as f64).collect();
            out.push(WeightVector::normalized(w).expect("lattice point is a valid weight"));
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            rec(pos + 1, left - c, denom, counts, out);
        }
    }
    rec(0, denom, denom, &mut counts, &mut out);
    Ok(out)
}

pub fn scalarization_grid(kind: ScalarizationKind, k: usize, m: usize) -> Result<Vec<Scalarization>> {
    Ok(weight_grid(k, m)?.into_iter().map(|w| Scalarization::new(kind, w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = weight_grid(2, 3).unwrap();
        let v: Vec<Vec<f64>> = g.iter().map(|w| w.as_slice().to_vec()).collect();
        assert_eq!(v, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(weight_grid(3, 3).unwrap().len(), 6);
        assert_eq!(weight_grid(2, 11).unwrap().len(), 11);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn examples() {
        let l = Scalarization::linear(vec![0.25, 0.75]).unwrap();
        assert_eq!(l.scalarize(&[0.0, 0.2]).unwrap(), 0.15000000000000002);
        let t = Scalarization::tchebycheff(vec![0.5, 0.5]).unwrap();
        assert_eq!(t.scalarize(&[0.1, 0.3]).unwrap(), 0.15);
        assert!(l.scalarize(&[1.0]).is_err());
    }
}
