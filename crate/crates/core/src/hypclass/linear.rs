//! Norm-ball linear predictors over identity or polynomial features.

use serde::{Deserialize, Serialize};

use crate::numeric::{binomial, norm2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum FeatureMap {
    Identity,
    /// All monomials of total degree at most `degree`, graded lexicographic.
    Polynomial {
        degree: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ball {
    L1,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "link", rename_all = "snake_case")]
pub enum Link {
    Identity,
    /// Sigmoid output clipped to `[eps, 1 - eps]`.
    Sigmoid {
        eps: f64,
    },
}

pub const DEFAULT_SIGMOID_CLIP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClass {
    pub input_dim: usize,
    pub features: FeatureMap,
    pub ball: Ball,
    pub radius: f64,
    pub link: Link,
}

/// Exponent vectors of the graded lexicographic monomial basis.
pub fn polynomial_exponents(d: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() - 1 {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            fill(pos + 1, left - e, cur, out);
        }
    }
    let mut out = Vec::with_capacity(binomial(d + degree as usize, degree as usize));
    let mut cur = vec![0; d];
    for total in 0..=degree {
        fill(0, total, &mut cur, &mut out);
    }
    out
}

pub fn polynomial_features(x: &[f64], degree: u32) -> Vec<f64> {
    let mut out = Vec::new();
    polynomial_features_into(x, &polynomial_exponents(x.len(), degree), &mut out);
    out
}

pub(crate) fn polynomial_features_into(x: &[f64], exponents: &[Vec<u32>], out: &mut Vec<f64>) {
    for e in exponents {
        out.push(x.iter().zip(e).map(|(v, &p)| v.powi(p as i32)).product());
    }
}

impl LinearClass {
    pub fn new(input_dim: usize, features: FeatureMap, ball: Ball, radius: f64, link: Link) -> Self {
        assert!(input_dim >= 1 && radius >= 0.0 && radius.is_finite());
        Self { input_dim, features, ball, radius, link }
    }

    pub fn feature_dim(&self) -> usize {
        match self.features {
            FeatureMap::Identity => self.input_dim,
            FeatureMap::Polynomial { degree } => binomial(self.input_dim + degree as usize, degree as usize),
        }
    }

    pub(crate) fn exponents(&self) -> Option<Vec<Vec<u32>>> {
        match self.features {
            FeatureMap::Identity => None,
            FeatureMap::Polynomial { degree } => Some(polynomial_exponents(self.input_dim, degree)),
        }
    }

    pub fn features_of(&self, x: &[f64]) -> Vec<f64> {
        match self.features {
            FeatureMap::Identity => x.to_vec(),
            FeatureMap::Polynomial { degree } => polynomial_features(x, degree),
        }
    }

    pub fn apply_link(&self, z: f64) -> f64 {
        match self.link {
            Link::Identity => z,
            Link::Sigmoid { eps } => crate::numeric::sigmoid(z).clamp(eps, 1.0 - eps),
        }
    }

    pub fn norm(&self, w: &[f64]) -> f64 {
        match self.ball {
            Ball::L1 => w.iter().map(|v| v.abs()).sum(),
            Ball::L2 => norm2(w),
        }
    }

    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        match self.ball {
            Ball::L2 => project_l2_ball(raw, self.radius),
            Ball::L1 => project_l1_ball(raw, self.radius),
        }
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        w.len() == self.feature_dim() && w.iter().all(|v| v.is_finite()) && self.norm(w) <= self.radius + tol
    }
}

pub fn project_l2_ball(raw: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(raw);
    if n <= radius {
        raw.to_vec()
    } else {
        let s = radius / n;
        raw.iter().map(|v| v * s).collect()
    }
}

/// Projection onto the l1 ball via sorting of magnitudes.
pub fn project_l1_ball(raw: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = raw.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return raw.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; raw.len()];
    }
    let mut mags: Vec<f64> = raw.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j + 1) as f64;
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    raw.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}
