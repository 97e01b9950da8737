//! Exact population quantities on discrete or quadrature supports.
//!
//! For a Bregman loss the excess risk of `f` equals the divergence between
//! the Bayes predictor and `f`:
//!
//! ```text
//! E_k(f) = R_k(f) - R_k(f*_k) = E_X D(f*_k(X), f(X))
//! ```
//!
//! For the zero-one loss with `theta(x) = P(Y = 1 | x)`:
//!
//! ```text
//! E_k(f) = E_X |2 theta(X) - 1| |f(X) - 1{theta(X) >= 1/2}|
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};
use crate::hypclass::{FiniteClass, HypothesisClass, Model};
use crate::losses::TaskLoss;
use crate::scalarize::{Scalarization, ScalarizationKind};
use crate::solve::ENUMERATION_BUDGET;

const MASS_TOL: f64 = 1e-9;

/// Anything that maps a covariate to a scalar prediction.
pub trait Predictor: Sync {
    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

/// A model together with its class.
pub struct Bound<'a> {
    pub class: &'a HypothesisClass,
    pub model: &'a Model,
}

impl<'a> Bound<'a> {
    pub fn new(class: &'a HypothesisClass, model: &'a Model) -> Result<Self> {
        class.check_model(model, crate::data::Tolerances::default().constraint_tol)?;
        Ok(Self { class, model })
    }
}

impl Predictor for Bound<'_> {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.class.predict(&self.model.params, x)
    }

    fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.class.predict_batch(&self.model.params, xs)
    }
}

/// Wraps a closure as a predictor.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok((self.0)(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationTask {
    pub points: Vec<Vec<f64>>,
    /// Probability mass or quadrature weight per point; sums to one.
    pub weights: Vec<f64>,
    /// Conditional mean `E[Y | x]` per point.
    pub bayes: Vec<f64>,
    /// Optional finite label law per point as `(label, probability)` pairs.
    pub labels: Option<Vec<Vec<(f64, f64)>>>,
    pub loss: TaskLoss,
}

impl PopulationTask {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, bayes: Vec<f64>, loss: TaskLoss) -> Result<Self> {
        let t = Self { points, weights, bayes, labels: None, loss };
        t.validate()?;
        Ok(t)
    }

    /// Task with a finite label law; the conditional mean is derived from it.
    pub fn with_labels(points: Vec<Vec<f64>>, weights: Vec<f64>, labels: Vec<Vec<(f64, f64)>>, loss: TaskLoss) -> Result<Self> {
        let bayes = labels.iter().map(|l| l.iter().map(|(y, p)| y * p).sum()).collect();
        let t = Self { points, weights, bayes, labels: Some(labels), loss };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n == 0 || self.weights.len() != n || self.bayes.len() != n {
            return Err(MolError::Shape("population task needs one weight and one Bayes value per point".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(MolError::Config("negative or NaN population weight".into()));
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(MolError::Config(format!("population weights sum to {s}")));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(MolError::Shape("label law per point".into()));
            }
            for l in labels {
                let ps: f64 = l.iter().map(|(_, p)| p).sum();
                if (ps - 1.0).abs() > MASS_TOL || l.iter().any(|(_, p)| *p < 0.0) {
                    return Err(MolError::Config("label probabilities must sum to one".into()));
                }
            }
        }
        match &self.loss {
            TaskLoss::ZeroOne => {
                if self.bayes.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(MolError::Domain("class probabilities must lie in [0, 1]".into()));
                }
            }
            TaskLoss::Bregman(l) => {
                for b in &self.bayes {
                    l.phi(&[*b])?;
                }
            }
        }
        Ok(())
    }

    /// Bayes predictor value at point `j`.
    pub fn bayes_predictor(&self, j: usize) -> f64 {
        match self.loss {
            TaskLoss::ZeroOne => (self.bayes[j] >= 0.5) as u8 as f64,
            TaskLoss::Bregman(_) => self.bayes[j],
        }
    }

    fn pointwise_excess(&self, j: usize, f: f64) -> Result<f64> {
        match &self.loss {
            TaskLoss::Bregman(l) => l.divergence(&[self.bayes[j]], &[f]),
            TaskLoss::ZeroOne => {
                let t = self.bayes[j];
                Ok((2.0 * t - 1.0).abs() * crate::losses::zero_one(self.bayes_predictor(j), f)?)
            }
        }
    }

    fn pointwise_risk(&self, j: usize, f: f64) -> Result<f64> {
        let labels = self.labels.as_ref().ok_or_else(|| MolError::Config("risk needs a label law".into()))?;
        labels[j].iter().map(|(y, p)| Ok(p * self.loss.value(&[*y], &[f])?)).sum()
    }

    /// `E[l(Y, f(X))]`; needs a label law.
    pub fn risk(&self, f: &dyn Predictor) -> Result<f64> {
        let preds = f.predict_all(&self.points)?;
        (0..self.points.len()).map(|j| Ok(self.weights[j] * self.pointwise_risk(j, preds[j])?)).sum()
    }

    pub fn bayes_risk(&self) -> Result<f64> {
        (0..self.points.len()).map(|j| Ok(self.weights[j] * self.pointwise_risk(j, self.bayes_predictor(j))?)).sum()
    }

    pub fn excess(&self, f: &dyn Predictor) -> Result<f64> {
        let preds = f.predict_all(&self.points)?;
        self.excess_of_values(&preds)
    }

    pub fn excess_of_values(&self, preds: &[f64]) -> Result<f64> {
        (0..self.points.len()).map(|j| Ok(self.weights[j] * self.pointwise_excess(j, preds[j])?)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub tasks: Vec<PopulationTask>,
}

impl PopulationSpec {
    pub fn new(tasks: Vec<PopulationTask>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(MolError::Config("no tasks".into()));
        }
        Ok(Self { tasks })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Tasks on a common 1-D trapezoid grid of `[0, 1]` with the given
    /// (unnormalized) densities and Bayes functions.
    pub fn grid_1d(points: usize, densities: &[&dyn Fn(f64) -> f64], bayes: &[&dyn Fn(f64) -> f64], losses: &[TaskLoss]) -> Result<Self> {
        if densities.len() != bayes.len() || bayes.len() != losses.len() || points < 2 {
            return Err(MolError::Shape("one density, Bayes function and loss per task".into()));
        }
        let h = 1.0 / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
        let trap: Vec<f64> = (0..points).map(|i| if i == 0 || i == points - 1 { 0.5 * h } else { h }).collect();
        let mut tasks = Vec::new();
        for ((p, f), loss) in densities.iter().zip(bayes).zip(losses) {
            let raw: Vec<f64> = xs.iter().zip(&trap).map(|(x, w)| w * p(*x)).collect();
            if raw.iter().any(|v| *v < 0.0) {
                return Err(MolError::Config("negative density".into()));
            }
            let z: f64 = raw.iter().sum();
            let weights = raw.iter().map(|v| v / z).collect();
            tasks.push(PopulationTask::new(xs.iter().map(|x| vec![*x]).collect(), weights, xs.iter().map(|x| f(*x)).collect(), *loss)?);
        }
        Self::new(tasks)
    }

    fn shared_support(&self) -> bool {
        self.tasks.iter().all(|t| t.points == self.tasks[0].points)
    }
}

/// Excess risk of `f` for every task.
pub fn population_excess_risks(spec: &PopulationSpec, f: &dyn Predictor) -> Result<Vec<f64>> {
    spec.tasks.iter().map(|t| t.excess(f)).collect()
}

/// Excess risks computed as risk minus Bayes risk.
pub fn excess_via_risks(spec: &PopulationSpec, f: &dyn Predictor) -> Result<Vec<f64>> {
    spec.tasks.iter().map(|t| Ok(t.risk(f)? - t.bayes_risk()?)).collect()
}

/// Naive discrepancy `E l(f*_k(X), f(X))` with the Bayes predictor as label.
pub fn bayes_discrepancies(spec: &PopulationSpec, f: &dyn Predictor) -> Result<Vec<f64>> {
    spec.tasks
        .iter()
        .map(|t| {
            let preds = f.predict_all(&t.points)?;
            (0..t.points.len()).map(|j| Ok(t.weights[j] * t.loss.value(&[t.bayes_predictor(j)], &[preds[j]])?)).sum()
        })
        .collect()
}

pub fn tradeoff_value(spec: &PopulationSpec, s: &Scalarization, f: &dyn Predictor) -> Result<f64> {
    s.scalarize(&population_excess_risks(spec, f)?)
}

/// `s(E(f)) - reference`, where the reference is `inf_G s(E(g))`.
pub fn excess_s_tradeoff(spec: &PopulationSpec, s: &Scalarization, f: &dyn Predictor, reference: Option<f64>) -> Result<f64> {
    let r = reference.ok_or_else(|| MolError::Config("no reference value for the trade-off excess".into()))?;
    Ok(tradeoff_value(spec, s, f)? - r)
}

/// Pointwise minimizer of a linear trade-off over all measurable functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointwiseOptimum {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Points where every weighted density vanishes; the value there is arbitrary.
    pub degenerate: Vec<bool>,
}

impl Predictor for PointwiseOptimum {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() == 1 && self.points.first().is_some_and(|p| p.len() == 1) {
            let t = x[0];
            let j = self.points.partition_point(|p| p[0] < t);
            if j < self.points.len() && self.points[j][0] == t {
                return Ok(self.values[j]);
            }
            if j == 0 || j == self.points.len() {
                return Err(MolError::Domain(format!("{t} outside the support")));
            }
            let (a, b) = (self.points[j - 1][0], self.points[j][0]);
            let w = (t - a) / (b - a);
            return Ok((1.0 - w) * self.values[j - 1] + w * self.values[j]);
        }
        self.points.iter().position(|p| p.as_slice() == x).map(|j| self.values[j]).ok_or_else(|| MolError::Domain("point outside the support".into()))
    }
}

/// Closed-form optimum for losses sharing one potential:
/// `g_s(x) = sum_k lambda_k p_k(x) f*_k(x) / sum_k lambda_k p_k(x)`.
pub fn pointwise_tradeoff_optimum(spec: &PopulationSpec, s: &Scalarization) -> Result<PointwiseOptimum> {
    if s.kind != ScalarizationKind::Linear {
        return Err(MolError::Unsupported("pointwise optimum needs a linear scalarization".into()));
    }
    if s.num_tasks() != spec.num_tasks() {
        return Err(MolError::Shape("one weight per task".into()));
    }
    let first = spec.tasks[0].loss.bregman().ok_or_else(|| MolError::Unsupported("Bregman losses only".into()))?;
    for t in &spec.tasks {
        match t.loss.bregman() {
            Some(l) if l.same_potential(first) => {}
            _ => return Err(MolError::Unsupported("all tasks must share one Bregman potential".into())),
        }
    }
    if !spec.shared_support() {
        return Err(MolError::Unsupported("tasks must share their support points".into()));
    }
    let lambda = s.weights.as_slice();
    let n = spec.tasks[0].points.len();
    let mut values = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for j in 0..n {
        let mass: f64 = spec.tasks.iter().zip(lambda).map(|(t, l)| l * t.weights[j]).sum();
        if mass > 0.0 {
            let num: f64 = spec.tasks.iter().zip(lambda).map(|(t, l)| l * t.weights[j] * t.bayes[j]).sum();
            values.push(num / mass);
            degenerate.push(false);
        } else {
            let avg = spec.tasks.iter().map(|t| t.bayes[j]).sum::<f64>() / spec.num_tasks() as f64;
            values.push(avg);
            degenerate.push(true);
        }
    }
    Ok(PointwiseOptimum { points: spec.tasks[0].points.clone(), values, degenerate })
}

/// Exhaustive minimizer of `s(E(g))` over a finite class whose domain covers
/// the support. Ties go to the lexicographically smallest member.
pub fn finite_tradeoff_minimizer(spec: &PopulationSpec, g: &FiniteClass, s: &Scalarization) -> Result<(Model, f64)> {
    if g.cardinality() > ENUMERATION_BUDGET {
        return Err(MolError::Budget(format!("{} candidates", g.cardinality())));
    }
    let class = HypothesisClass::Finite(g.clone());
    // table[k][j][o]: excess contribution of task k at domain point j for output o
    let mut table = Vec::new();
    for t in &spec.tasks {
        let mut c: Vec<Vec<f64>> = g.outputs.iter().map(|o| vec![0.0; o.len()]).collect();
        for (j, x) in t.points.iter().enumerate() {
            let d = g.index_of(x)?;
            for (o, &out) in g.outputs[d].iter().enumerate() {
                c[d][o] += t.weights[j] * t.pointwise_excess(j, out).unwrap_or(f64::INFINITY);
            }
        }
        table.push(c);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut vals = vec![0.0; spec.num_tasks()];
    g.for_each_member(|params| {
        for (k, c) in table.iter().enumerate() {
            vals[k] = params.iter().enumerate().map(|(j, v)| c[j][g.outputs[j].iter().position(|o| o == v).expect("member")]).sum();
        }
        let f = s.scalarize(&vals).expect("matching lengths");
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, params.to_vec()));
        }
    });
    let (f, params) = best.expect("non-empty class");
    Ok((class.model(params), f))
}

fn phi2(loss: &TaskLoss, y: f64) -> Result<f64> {
    let l = loss.bregman().ok_or_else(|| MolError::Unsupported("Bregman losses only".into()))?;
    Ok(l.hessian_diag(&[y])?[0])
}

/// Pointwise field `sum_k lambda_k (p_k / mu_s) phi''(g) (g - f*_k)` on the
/// shared support; it vanishes at the unconstrained optimum.
pub fn variational_gradient_field(spec: &PopulationSpec, s: &Scalarization, g: &dyn Predictor) -> Result<Vec<f64>> {
    if !spec.shared_support() {
        return Err(MolError::Unsupported("tasks must share their support points".into()));
    }
    let lambda = s.weights.as_slice();
    let gv = g.predict_all(&spec.tasks[0].points)?;
    (0..gv.len())
        .map(|j| {
            let mass: f64 = spec.tasks.iter().zip(lambda).map(|(t, l)| l * t.weights[j]).sum();
            if mass == 0.0 {
                return Ok(0.0);
            }
            let mut acc = 0.0;
            for (t, l) in spec.tasks.iter().zip(lambda) {
                acc += l * t.weights[j] / mass * phi2(&t.loss, gv[j])? * (gv[j] - t.bayes[j]);
            }
            Ok(acc)
        })
        .collect()
}

/// `min_{g'} sum_k lambda_k E_k[phi''(g) (g - f*_k) (g' - g)]` over the
/// supplied directions; non-negative at a trade-off minimizer over a convex
/// class containing them.
pub fn variational_residual(spec: &PopulationSpec, s: &Scalarization, g: &dyn Predictor, directions: &[&dyn Predictor]) -> Result<f64> {
    if s.kind != ScalarizationKind::Linear {
        return Err(MolError::Unsupported("variational residual needs a linear scalarization".into()));
    }
    let lambda = s.weights.as_slice();
    let mut best = f64::INFINITY;
    for d in directions {
        let mut total = 0.0;
        for (t, l) in spec.tasks.iter().zip(lambda) {
            let gv = g.predict_all(&t.points)?;
            let dv = d.predict_all(&t.points)?;
            for j in 0..gv.len() {
                total += l * t.weights[j] * phi2(&t.loss, gv[j])? * (gv[j] - t.bayes[j]) * (dv[j] - gv[j]);
            }
        }
        best = best.min(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{make_binary_entropy_loss, make_square_loss};

    fn coin(p1: f64, p2: f64) -> PopulationSpec {
        let task = |p: f64| PopulationTask::with_labels(vec![vec![0.0]], vec![1.0], vec![vec![(0.0, 1.0 - p), (1.0, p)]], TaskLoss::ZeroOne).unwrap();
        PopulationSpec::new(vec![task(p1), task(p2)]).unwrap()
    }

    #[test]
    fn coin_excess_of_zero() {
        let spec = coin(1.0, 0.4);
        let e = population_excess_risks(&spec, &FnPredictor(|_: &[f64]| 0.0)).unwrap();
        assert_eq!(e, vec![1.0, 0.0]);
        let e1 = population_excess_risks(&spec, &FnPredictor(|_: &[f64]| 1.0)).unwrap();
        assert!((e1[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn finite_minimizer_on_coin() {
        let spec = coin(1.0, 0.4);
        let g = FiniteClass::binary(vec![vec![0.0]]).unwrap();
        let s = Scalarization::linear(vec![0.25, 0.75]).unwrap();
        let (m, v) = finite_tradeoff_minimizer(&spec, &g, &s).unwrap();
        assert_eq!(m.params, vec![1.0]);
        assert!((v - 0.15).abs() < 1e-15);
    }

    #[test]
    fn missing_reference_is_an_error() {
        let spec = coin(1.0, 0.4);
        let s = Scalarization::linear(vec![0.5, 0.5]).unwrap();
        assert!(matches!(excess_s_tradeoff(&spec, &s, &FnPredictor(|_: &[f64]| 0.0), None), Err(MolError::Config(_))));
    }

    #[test]
    fn mixed_potentials_are_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        let a = PopulationTask::new(pts.clone(), vec![0.5, 0.5], vec![0.2, 0.4], TaskLoss::Bregman(make_square_loss(1))).unwrap();
        let b = PopulationTask::new(pts, vec![0.5, 0.5], vec![0.2, 0.4], TaskLoss::Bregman(make_binary_entropy_loss(None))).unwrap();
        let spec = PopulationSpec::new(vec![a, b]).unwrap();
        let s = Scalarization::linear(vec![0.5, 0.5]).unwrap();
        assert!(matches!(pointwise_tradeoff_optimum(&spec, &s), Err(MolError::Unsupported(_))));
    }
}
