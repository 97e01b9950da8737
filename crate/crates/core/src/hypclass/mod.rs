//! Hypothesis classes, fitted models and the nesting map `H -> G`.

mod finite;
mod grid;
mod linear;

pub use finite::FiniteClass;
pub use grid::{project_bounded_steps, GridLipschitzClass};
pub use linear::{
    polynomial_exponents, polynomial_features, project_l1_ball, project_l2_ball, Ball, FeatureMap, LinearClass, Link, DEFAULT_SIGMOID_CLIP,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MolError, Result};
use crate::rng::StreamRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum HypothesisClass {
    Linear(LinearClass),
    Grid(GridLipschitzClass),
    Finite(FiniteClass),
}

/// A fitted member of a class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub class_id: String,
    pub params: Vec<f64>,
}

/// Covariates prepared once for repeated evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum Design {
    Dense { p: usize, rows: Vec<f64> },
    Grid { cells: Vec<usize>, theta: Vec<f64> },
    Finite { index: Vec<usize> },
}

impl Design {
    pub fn len(&self) -> usize {
        match self {
            Design::Dense { p, rows } => rows.len() / p.max(&1),
            Design::Grid { cells, .. } => cells.len(),
            Design::Finite { index } => index.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    class: HypothesisClass,
    params: Vec<f64>,
}

impl HypothesisClass {
    /// Stable identifier used to tie models to their class.
    pub fn descriptor(&self) -> String {
        match self {
            HypothesisClass::Linear(c) => {
                let feat = match c.features {
                    FeatureMap::Identity => "id".to_string(),
                    FeatureMap::Polynomial { degree } => format!("poly{degree}"),
                };
                let ball = match c.ball {
                    Ball::L1 => "l1",
                    Ball::L2 => "l2",
                };
                let link = match c.link {
                    Link::Identity => "identity".to_string(),
                    Link::Sigmoid { eps } => format!("sigmoid{eps:e}"),
                };
                format!("linear(d={},{feat},{ball},R={:e},{link})", c.input_dim, c.radius)
            }
            HypothesisClass::Grid(c) => match c.lipschitz {
                Some(l) => format!("grid(m={},L={l:e},[{:e},{:e}])", c.grid_size, c.lo, c.hi),
                None => format!("grid(m={},free,[{:e},{:e}])", c.grid_size, c.lo, c.hi),
            },
            HypothesisClass::Finite(c) => {
                let bytes = serde_json::to_vec(c).expect("finite class serializes");
                let digest = Sha256::digest(&bytes);
                let short: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
                format!("finite(M={},{short})", c.domain.len())
            }
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            HypothesisClass::Linear(c) => c.feature_dim(),
            HypothesisClass::Grid(c) => c.grid_size,
            HypothesisClass::Finite(c) => c.domain.len(),
        }
    }

    pub fn output_dim(&self) -> usize {
        1
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, HypothesisClass::Finite(_))
    }

    pub fn link(&self) -> Link {
        match self {
            HypothesisClass::Linear(c) => c.link,
            _ => Link::Identity,
        }
    }

    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        match self {
            HypothesisClass::Linear(c) => c.project(raw),
            HypothesisClass::Grid(c) => c.project(raw),
            HypothesisClass::Finite(c) => c.project(raw),
        }
    }

    pub fn contains(&self, params: &[f64], tol: f64) -> bool {
        match self {
            HypothesisClass::Linear(c) => c.contains(params, tol),
            HypothesisClass::Grid(c) => c.contains(params, tol),
            HypothesisClass::Finite(c) => c.contains(params, tol),
        }
    }

    pub fn model(&self, params: Vec<f64>) -> Model {
        Model { class_id: self.descriptor(), params }
    }

    /// Projects raw parameters and wraps them as a model.
    pub fn project_model(&self, raw: &[f64]) -> Model {
        self.model(self.project(raw))
    }

    pub fn initial_params(&self) -> Vec<f64> {
        match self {
            HypothesisClass::Linear(c) => vec![0.0; c.feature_dim()],
            HypothesisClass::Grid(c) => vec![0.5 * (c.lo + c.hi); c.grid_size],
            HypothesisClass::Finite(c) => c.outputs.iter().map(|o| o[0]).collect(),
        }
    }

    pub fn random_params(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            HypothesisClass::Linear(c) => {
                let g: Vec<f64> = (0..c.feature_dim()).map(|_| rng.sample(StandardNormal)).collect();
                let n = c.norm(&g).max(f64::MIN_POSITIVE);
                let r: f64 = rng.random::<f64>() * c.radius;
                g.iter().map(|v| v * r / n).collect::<Vec<_>>()
            }
            HypothesisClass::Grid(c) => {
                let raw: Vec<f64> = (0..c.grid_size).map(|_| rng.random_range(c.lo..=c.hi)).collect();
                c.project(&raw)
            }
            HypothesisClass::Finite(c) => c.outputs.iter().map(|o| o[rng.random_range(0..o.len())]).collect(),
        }
    }

    pub fn design(&self, xs: &[Vec<f64>]) -> Result<Design> {
        match self {
            HypothesisClass::Linear(c) => {
                let p = c.feature_dim();
                let mut rows = Vec::with_capacity(xs.len() * p);
                let exps = c.exponents();
                for x in xs {
                    if x.len() != c.input_dim {
                        return Err(MolError::Shape(format!("covariate of length {}, class expects {}", x.len(), c.input_dim)));
                    }
                    match &exps {
                        None => rows.extend_from_slice(x),
                        Some(e) => linear::polynomial_features_into(x, e, &mut rows),
                    }
                }
                Ok(Design::Dense { p, rows })
            }
            HypothesisClass::Grid(c) => {
                let mut cells = Vec::with_capacity(xs.len());
                let mut theta = Vec::with_capacity(xs.len());
                for x in xs {
                    if x.len() != 1 {
                        return Err(MolError::Shape("grid classes take scalar covariates".into()));
                    }
                    let (cell, t) = c.locate(x[0])?;
                    cells.push(cell);
                    theta.push(t);
                }
                Ok(Design::Grid { cells, theta })
            }
            HypothesisClass::Finite(c) => Ok(Design::Finite { index: xs.iter().map(|x| c.index_of(x)).collect::<Result<_>>()? }),
        }
    }

    /// Pre-link scores for every design row.
    pub fn scores(&self, design: &Design, params: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match design {
            Design::Dense { p, rows } => out.extend(rows.chunks_exact(*p).map(|r| crate::numeric::dot(r, params))),
            Design::Grid { cells, theta } => out.extend(cells.iter().zip(theta).map(|(&c, &t)| GridLipschitzClass::interpolate(params, c, t))),
            Design::Finite { index } => out.extend(index.iter().map(|&i| params[i])),
        }
    }

    /// Accumulates `sum_i dscore_i * d score_i / d params` into `grad`.
    pub fn backward(&self, design: &Design, dscore: &[f64], grad: &mut [f64]) {
        match design {
            Design::Dense { p, rows } => {
                for (r, &g) in rows.chunks_exact(*p).zip(dscore) {
                    if g != 0.0 {
                        for (acc, v) in grad.iter_mut().zip(r) {
                            *acc += g * v;
                        }
                    }
                }
            }
            Design::Grid { cells, theta } => {
                for ((&c, &t), &g) in cells.iter().zip(theta).zip(dscore) {
                    grad[c] += g * (1.0 - t);
                    grad[c + 1] += g * t;
                }
            }
            Design::Finite { index } => {
                for (&i, &g) in index.iter().zip(dscore) {
                    grad[i] += g;
                }
            }
        }
    }

    /// Output for a score, after the link.
    pub fn output_of_score(&self, z: f64) -> f64 {
        match self {
            HypothesisClass::Linear(c) => c.apply_link(z),
            _ => z,
        }
    }

    /// Unchecked scalar prediction.
    pub fn predict(&self, params: &[f64], x: &[f64]) -> Result<f64> {
        let z = match self {
            HypothesisClass::Linear(c) => {
                if x.len() != c.input_dim {
                    return Err(MolError::Shape(format!("covariate of length {}, class expects {}", x.len(), c.input_dim)));
                }
                crate::numeric::dot(&c.features_of(x), params)
            }
            HypothesisClass::Grid(c) => {
                if x.len() != 1 {
                    return Err(MolError::Shape("grid classes take scalar covariates".into()));
                }
                let (cell, t) = c.locate(x[0])?;
                GridLipschitzClass::interpolate(params, cell, t)
            }
            HypothesisClass::Finite(c) => params[c.index_of(x)?],
        };
        Ok(self.output_of_score(z))
    }

    /// Outputs on a batch of covariates.
    pub fn predict_batch(&self, params: &[f64], xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let design = self.design(xs)?;
        let mut out = Vec::new();
        self.scores(&design, params, &mut out);
        for v in out.iter_mut() {
            *v = self.output_of_score(*v);
        }
        Ok(out)
    }

    pub fn check_model(&self, model: &Model, tol: f64) -> Result<()> {
        if model.class_id != self.descriptor() {
            return Err(MolError::Membership(format!("model of {} used with {}", model.class_id, self.descriptor())));
        }
        if !self.contains(&model.params, tol) {
            return Err(MolError::Membership(format!("parameters violate the constraints of {}", model.class_id)));
        }
        Ok(())
    }

    /// Checked evaluation of a model at one covariate.
    pub fn evaluate(&self, model: &Model, x: &[f64]) -> Result<Vec<f64>> {
        self.check_model(model, crate::data::Tolerances::default().constraint_tol)?;
        Ok(vec![self.predict(&model.params, x)?])
    }

    /// Maps a model of `self` to an identical function in `target`.
    pub fn embed(&self, model: &Model, target: &HypothesisClass) -> Result<Model> {
        let tol = crate::data::Tolerances::default().constraint_tol;
        self.check_model(model, tol)?;
        let params = match (self, target) {
            (HypothesisClass::Linear(h), HypothesisClass::Linear(g)) => {
                if h.input_dim != g.input_dim || h.link != g.link {
                    return Err(MolError::Unsupported("linear classes differ in input dimension or link".into()));
                }
                let mut w = vec![0.0; g.feature_dim()];
                match (h.features, g.features) {
                    (FeatureMap::Identity, FeatureMap::Identity) => w.copy_from_slice(&model.params),
                    (FeatureMap::Identity, FeatureMap::Polynomial { degree }) if degree >= 1 => w[1..=h.input_dim].copy_from_slice(&model.params),
                    (FeatureMap::Polynomial { degree: a }, FeatureMap::Polynomial { degree: b }) if a <= b => {
                        w[..model.params.len()].copy_from_slice(&model.params)
                    }
                    _ => return Err(MolError::Unsupported("feature map of H does not embed into G".into())),
                }
                w
            }
            (HypothesisClass::Grid(h), HypothesisClass::Grid(g)) => {
                if h.lo != g.lo || h.hi != g.hi || (g.grid_size - 1) % (h.grid_size - 1) != 0 {
                    return Err(MolError::Unsupported("grid of H does not refine into G".into()));
                }
                (0..g.grid_size)
                    .map(|i| {
                        let (cell, t) = h.locate(g.node(i)).expect("grid node lies in [0, 1]");
                        GridLipschitzClass::interpolate(&model.params, cell, t)
                    })
                    .collect()
            }
            (HypothesisClass::Finite(h), HypothesisClass::Finite(g)) => {
                if h.domain != g.domain {
                    return Err(MolError::Unsupported("finite classes on different domains".into()));
                }
                model.params.clone()
            }
            _ => return Err(MolError::Unsupported("H and G are of different kinds".into())),
        };
        if !target.contains(&params, tol) {
            return Err(MolError::Membership("embedded model falls outside G".into()));
        }
        Ok(target.model(params))
    }

    pub fn model_to_json(&self, model: &Model) -> Result<String> {
        if model.class_id != self.descriptor() {
            return Err(MolError::Membership("model does not belong to this class".into()));
        }
        Ok(serde_json::to_string(&ModelFile { class: self.clone(), params: model.params.clone() })?)
    }

    pub fn model_from_json(s: &str) -> Result<(HypothesisClass, Model)> {
        let f: ModelFile = serde_json::from_str(s)?;
        let model = f.class.model(f.params);
        Ok((f.class, model))
    }
}
