//! Empirical objectives and the constrained minimizer.
//!
//! An objective is a scalarization of per-term empirical means
//!
//! ```text
//! F(g) = s( sum_i w_1i l_1(t_1i, g(x_1i)), ..., sum_i w_Ki l_K(t_Ki, g(x_Ki)) )
//! ```
//!
//! where the targets are labels, pseudo-labels of a fixed teacher, or
//! population conditional means. Smooth objectives are minimized by projected
//! gradient steps with halving backtracking (optionally with monotone
//! momentum); Tchebycheff objectives by projected subgradient steps; finite
//! classes by enumeration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Tolerances;
use crate::error::{MolError, Result};
use crate::hypclass::{Design, HypothesisClass, Link, Model};
use crate::losses::{zero_one, Potential, TaskLoss};
use crate::numeric::{dot, norm2, sigmoid, softplus, xlogx};
use crate::rng::child_rng;
use crate::scalarize::{Scalarization, ScalarizationKind};

/// Largest finite class the enumerator will scan.
pub const ENUMERATION_BUDGET: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TargetSource {
    Labels,
    PseudoLabels { teacher: String },
    Population,
}

#[derive(Clone, Debug)]
pub struct Term {
    pub loss: TaskLoss,
    pub design: Arc<Design>,
    pub targets: Arc<Vec<f64>>,
    /// Per-point weights; `None` means the plain mean.
    pub point_weights: Option<Arc<Vec<f64>>>,
    pub source: TargetSource,
}

impl Term {
    pub fn new(loss: TaskLoss, design: Arc<Design>, targets: Arc<Vec<f64>>, source: TargetSource) -> Self {
        Self { loss, design, targets, point_weights: None, source }
    }

    pub fn weighted(mut self, weights: Arc<Vec<f64>>) -> Self {
        self.point_weights = Some(weights);
        self
    }

    fn weight(&self, i: usize, inv_n: f64) -> f64 {
        match &self.point_weights {
            Some(w) => w[i],
            None => inv_n,
        }
    }
}

#[derive(Clone, Copy)]
enum Kernel {
    /// Binary entropy composed with the sigmoid, evaluated in logit space.
    EntropyLogit,
    Bregman(crate::losses::BregmanLoss),
    BregmanSigmoid(crate::losses::BregmanLoss, f64),
    ZeroOne,
}

impl Kernel {
    fn new(loss: &TaskLoss, link: Link) -> Self {
        match (loss, link) {
            (TaskLoss::ZeroOne, _) => Kernel::ZeroOne,
            (TaskLoss::Bregman(l), Link::Sigmoid { .. }) if l.potential == Potential::BinaryEntropy => Kernel::EntropyLogit,
            (TaskLoss::Bregman(l), Link::Sigmoid { eps }) => Kernel::BregmanSigmoid(*l, eps),
            (TaskLoss::Bregman(l), Link::Identity) => Kernel::Bregman(*l),
        }
    }

    /// Loss value and its derivative in the score.
    #[inline]
    fn eval(&self, y: f64, z: f64) -> (f64, f64) {
        match *self {
            Kernel::EntropyLogit => (xlogx(y) + xlogx(1.0 - y) + softplus(z) - y * z, sigmoid(z) - y),
            Kernel::Bregman(l) => {
                if l.potential == Potential::BinaryEntropy && !(z > 0.0 && z < 1.0) {
                    return (f64::INFINITY, 0.0);
                }
                (l.div1(y, z), l.ddiv1(y, z))
            }
            Kernel::BregmanSigmoid(l, eps) => {
                let s = sigmoid(z);
                let yh = s.clamp(eps, 1.0 - eps);
                let dlink = if s == yh { s * (1.0 - s) } else { 0.0 };
                (l.div1(y, yh), l.ddiv1(y, yh) * dlink)
            }
            Kernel::ZeroOne => (if y == z { 0.0 } else { 1.0 }, 0.0),
        }
    }
}

/// Scalarized empirical objective over one hypothesis class.
#[derive(Clone, Debug)]
pub struct Objective {
    pub class: HypothesisClass,
    pub terms: Vec<Term>,
    pub scalarization: Scalarization,
}

impl Objective {
    pub fn new(class: HypothesisClass, terms: Vec<Term>, scalarization: Scalarization) -> Result<Self> {
        if terms.len() != scalarization.num_tasks() {
            return Err(MolError::Shape(format!("{} terms for {} weights", terms.len(), scalarization.num_tasks())));
        }
        for t in &terms {
            if t.targets.len() != t.design.len() {
                return Err(MolError::Shape("targets and design differ in length".into()));
            }
            if let Some(w) = &t.point_weights {
                if w.len() != t.design.len() {
                    return Err(MolError::Shape("point weights and design differ in length".into()));
                }
            }
            if let TaskLoss::Bregman(l) = t.loss {
                if l.q != 1 {
                    return Err(MolError::Unsupported("objectives over scalar-output classes need q = 1".into()));
                }
            }
            if t.design.is_empty() {
                return Err(MolError::Data("empty term".into()));
            }
        }
        Ok(Self { class, terms, scalarization })
    }

    /// Single-term objective, e.g. an empirical risk.
    pub fn single(class: HypothesisClass, term: Term) -> Result<Self> {
        Self::new(class, vec![term], Scalarization::linear(vec![1.0])?)
    }

    pub fn dim(&self) -> usize {
        self.class.num_params()
    }

    pub fn is_smooth(&self) -> bool {
        self.terms.iter().all(|t| t.loss.is_differentiable()) && !self.class.is_finite()
    }

    fn term_value_grad(&self, term: &Term, params: &[f64], grad: Option<&mut [f64]>, scores: &mut Vec<f64>) -> f64 {
        let kernel = Kernel::new(&term.loss, self.class.link());
        self.class.scores(&term.design, params, scores);
        let inv_n = 1.0 / scores.len() as f64;
        let mut total = 0.0;
        match grad {
            None => {
                for (i, (&z, &y)) in scores.iter().zip(term.targets.iter()).enumerate() {
                    total += term.weight(i, inv_n) * kernel.eval(y, z).0;
                }
            }
            Some(g) => {
                for (i, (z, &y)) in scores.iter_mut().zip(term.targets.iter()).enumerate() {
                    let w = term.weight(i, inv_n);
                    let (v, d) = kernel.eval(y, *z);
                    total += w * v;
                    *z = w * d;
                }
                self.class.backward(&term.design, scores, g);
            }
        }
        total
    }

    /// Per-term values (unweighted by the scalarization).
    pub fn term_values(&self, params: &[f64]) -> Vec<f64> {
        let mut scores = Vec::new();
        self.terms.iter().map(|t| self.term_value_grad(t, params, None, &mut scores)).collect()
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let lambda = self.scalarization.weights.as_slice();
        let mut scores = Vec::new();
        match self.scalarization.kind {
            ScalarizationKind::Linear => {
                self.terms.iter().zip(lambda).filter(|(_, &l)| l != 0.0).map(|(t, &l)| l * self.term_value_grad(t, params, None, &mut scores)).sum()
            }
            ScalarizationKind::Tchebycheff => {
                let v = self.term_values(params);
                self.scalarization.kind.combine(lambda, &v)
            }
        }
    }

    /// Value and (sub)gradient.
    pub fn value_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let lambda = self.scalarization.weights.as_slice();
        let mut scores = Vec::new();
        let mut buf = vec![0.0; grad.len()];
        match self.scalarization.kind {
            ScalarizationKind::Linear => {
                let mut total = 0.0;
                for (t, &l) in self.terms.iter().zip(lambda) {
                    if l == 0.0 {
                        continue;
                    }
                    buf.iter_mut().for_each(|g| *g = 0.0);
                    total += l * self.term_value_grad(t, params, Some(&mut buf), &mut scores);
                    for (g, b) in grad.iter_mut().zip(&buf) {
                        *g += l * b;
                    }
                }
                total
            }
            ScalarizationKind::Tchebycheff => {
                let v = self.term_values(params);
                let a = self.scalarization.active_task(&v);
                self.term_value_grad(&self.terms[a], params, Some(&mut buf), &mut scores);
                for (g, b) in grad.iter_mut().zip(&buf) {
                    *g = lambda[a] * b;
                }
                lambda[a] * v[a]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: Tolerances,
    /// Monotone momentum on top of the projected gradient step.
    pub accelerate: bool,
    pub record_trace: bool,
    /// Random restarts for objectives that may be non-convex.
    pub restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: Tolerances::default(), accelerate: true, record_trace: false, restarts: 5 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: Model,
    pub objective: f64,
    pub iterations: usize,
    pub grad_map_norm: f64,
    pub converged: bool,
    /// Accepted objective values, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
    pub starts: usize,
}

fn grad_map(class: &HypothesisClass, x: &[f64], g: &[f64], step: f64) -> f64 {
    let raw: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - step * b).collect();
    let p = class.project(&raw);
    let diff: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a - b).collect();
    norm2(&diff) / step
}

fn smooth_descent(obj: &Objective, x0: &[f64], opts: &SolverOptions) -> Result<FitReport> {
    let class = &obj.class;
    let n = obj.dim();
    let tol = opts.tol;
    let mut x = class.project(x0);
    let mut gx = vec![0.0; n];
    let mut fx = obj.value_and_grad(&x, &mut gx);
    if !fx.is_finite() {
        return Err(MolError::Data("objective is not finite at the starting point".into()));
    }
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(fx);
    }
    let mut y = x.clone();
    let mut fy = fx;
    let mut gy = gx.clone();
    let mut t = 1.0f64;
    let mut step = 1.0f64;
    let mut grow = false;
    let mut iterations = 0;
    let mut converged = false;
    let mut gm = f64::INFINITY;
    let mut z = vec![0.0; n];
    let mut gz = vec![0.0; n];
    while iterations < tol.max_iters {
        iterations += 1;
        if grow {
            step *= 2.0;
        }
        let from_x = y == x;
        let mut backtracked = false;
        let mut fz;
        let mut gm_y;
        loop {
            let raw: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - step * b).collect();
            z = class.project(&raw);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let d2 = dot(&diff, &diff);
            fz = obj.value(&z);
            let model_bound = fy + dot(&gy, &diff) + d2 / (2.0 * step) + 4.0 * f64::EPSILON * fy.abs();
            gm_y = d2.sqrt() / step;
            if fz <= model_bound || d2 == 0.0 {
                break;
            }
            step *= 0.5;
            backtracked = true;
            if step < 1e-30 {
                break;
            }
        }
        grow = !backtracked;
        gm = gm_y;
        let x_prev = std::mem::take(&mut x);
        let (x_new, f_new, restart) = if fz <= fx { (z.clone(), fz, false) } else { (x_prev.clone(), fx, true) };
        x = x_new;
        fx = f_new;
        if opts.record_trace {
            trace.push(fx);
        }
        if restart && from_x {
            // a plain gradient step from x no longer decreases f in floating point
            fx = obj.value_and_grad(&x, &mut gx);
            gm = grad_map(class, &x, &gx, step.max(1e-30));
            converged = true;
            break;
        }
        if gm_y <= tol.opt_rel_tol * (1.0 + fx.abs()) || step < 1e-30 {
            fx = obj.value_and_grad(&x, &mut gx);
            gm = grad_map(class, &x, &gx, step.max(1e-30));
            if gm <= tol.opt_rel_tol * (1.0 + fx.abs()) {
                converged = true;
                break;
            }
            if step < 1e-30 {
                break;
            }
        }
        if opts.accelerate && !restart {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let a = t / t_next;
            let b = (t - 1.0) / t_next;
            y = (0..n).map(|i| x[i] + a * (z[i] - x[i]) + b * (x[i] - x_prev[i])).collect();
            y = class.project(&y);
            t = t_next;
            fy = obj.value_and_grad(&y, &mut gy);
            if !fy.is_finite() {
                y = x.clone();
                fy = obj.value_and_grad(&y, &mut gy);
                t = 1.0;
            }
        } else {
            if restart {
                t = 1.0;
            }
            y = x.clone();
            fy = obj.value_and_grad(&y, &mut gz);
            std::mem::swap(&mut gy, &mut gz);
        }
    }
    Ok(FitReport { model: class.model(x), objective: fx, iterations, grad_map_norm: gm, converged, trace, starts: 1 })
}

fn subgradient_descent(obj: &Objective, x0: &[f64], opts: &SolverOptions) -> Result<FitReport> {
    let class = &obj.class;
    let scale = match class {
        HypothesisClass::Linear(c) => 0.2 * c.radius.max(1e-3),
        HypothesisClass::Grid(c) => 0.1 * (c.hi - c.lo) * (c.grid_size as f64).sqrt(),
        HypothesisClass::Finite(_) => 1.0,
    };
    let mut x = class.project(x0);
    let mut g = vec![0.0; x.len()];
    let mut best = x.clone();
    let mut fbest = obj.value(&x);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gnorm = f64::INFINITY;
    while iterations < opts.tol.max_iters {
        iterations += 1;
        let f = obj.value_and_grad(&x, &mut g);
        if f < fbest {
            fbest = f;
            best = x.clone();
        }
        if opts.record_trace {
            trace.push(fbest);
        }
        gnorm = norm2(&g);
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let alpha = scale / ((iterations as f64).sqrt() * gnorm);
        let raw: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
        x = class.project(&raw);
    }
    let f = obj.value(&x);
    if f < fbest {
        fbest = f;
        best = x;
    }
    Ok(FitReport { model: class.model(best), objective: fbest, iterations, grad_map_norm: gnorm, converged, trace, starts: 1 })
}

/// Exhaustive search over a finite class; ties go to the lexicographically
/// smallest parameter vector.
pub fn minimize_finite(obj: &Objective) -> Result<FitReport> {
    let HypothesisClass::Finite(class) = &obj.class else {
        return Err(MolError::Unsupported("enumeration needs a finite class".into()));
    };
    let card = class.cardinality();
    if card > ENUMERATION_BUDGET {
        return Err(MolError::Budget(format!("{card} candidates exceed the enumeration budget")));
    }
    let m = class.domain.len();
    // cost[k][j][o]: weighted loss of task k at domain point j when it outputs its o-th value
    let mut cost: Vec<Vec<Vec<f64>>> = Vec::with_capacity(obj.terms.len());
    for term in &obj.terms {
        let Design::Finite { index } = term.design.as_ref() else {
            return Err(MolError::Shape("finite class needs a finite design".into()));
        };
        let inv_n = 1.0 / index.len() as f64;
        let mut c: Vec<Vec<f64>> = class.outputs.iter().map(|o| vec![0.0; o.len()]).collect();
        for (i, &j) in index.iter().enumerate() {
            let w = term.weight(i, inv_n);
            let y = term.targets[i];
            for (o, &out) in class.outputs[j].iter().enumerate() {
                let l = match &term.loss {
                    TaskLoss::ZeroOne => zero_one(y, out)?,
                    TaskLoss::Bregman(b) => b.divergence(&[y], &[out]).unwrap_or(f64::INFINITY),
                };
                c[j][o] += w * l;
            }
        }
        cost.push(c);
    }
    let lambda = obj.scalarization.weights.as_slice();
    let kind = obj.scalarization.kind;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut vals = vec![0.0; obj.terms.len()];
    let mut count = 0usize;
    class.for_each_member(|params| {
        count += 1;
        for (k, c) in cost.iter().enumerate() {
            vals[k] = (0..m)
                .map(|j| {
                    let o = class.outputs[j].iter().position(|v| *v == params[j]).expect("member output");
                    c[j][o]
                })
                .sum();
        }
        let f = match kind {
            ScalarizationKind::Linear => lambda.iter().zip(&vals).filter(|(l, _)| **l != 0.0).map(|(l, v)| l * v).sum(),
            ScalarizationKind::Tchebycheff => kind.combine(lambda, &vals),
        };
        if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
            best = Some((f, params.to_vec()));
        }
    });
    let (f, params) = best.expect("finite class is non-empty");
    Ok(FitReport {
        model: obj.class.model(params),
        objective: f,
        iterations: count,
        grad_map_norm: 0.0,
        converged: true,
        trace: Vec::new(),
        starts: 1,
    })
}

/// Minimizes from `init` with default options.
pub fn minimize(obj: &Objective, init: &Model, tol: &Tolerances, seed: u64) -> Result<FitReport> {
    let opts = SolverOptions { tol: *tol, ..SolverOptions::default() };
    fit(obj, Some(init), &opts, seed)
}

fn needs_restarts(obj: &Objective) -> bool {
    match obj.class.link() {
        Link::Identity => false,
        Link::Sigmoid { .. } => obj.terms.iter().any(|t| !matches!(t.loss, TaskLoss::Bregman(l) if l.potential == Potential::BinaryEntropy)),
    }
}

/// Dispatches to enumeration, subgradient or smooth descent. Non-convex
/// sigmoid-link objectives keep the best of `opts.restarts` starts.
pub fn fit(obj: &Objective, init: Option<&Model>, opts: &SolverOptions, seed: u64) -> Result<FitReport> {
    if let Some(m) = init {
        if m.class_id != obj.class.descriptor() {
            return Err(MolError::Membership("initial model belongs to another class".into()));
        }
        if m.params.len() != obj.dim() {
            return Err(MolError::Shape("initial model has the wrong number of parameters".into()));
        }
    }
    if obj.class.is_finite() {
        return minimize_finite(obj);
    }
    if !obj.is_smooth() {
        return Err(MolError::Unsupported("non-differentiable loss over a parametric class".into()));
    }
    let x0 = init.map(|m| m.params.clone()).unwrap_or_else(|| obj.class.initial_params());
    let run = |x: &[f64]| match obj.scalarization.kind {
        ScalarizationKind::Linear => smooth_descent(obj, x, opts),
        ScalarizationKind::Tchebycheff => {
            if obj.terms.len() == 1 {
                smooth_descent(obj, x, opts)
            } else {
                subgradient_descent(obj, x, opts)
            }
        }
    };
    let mut best = run(&x0)?;
    if needs_restarts(obj) && opts.restarts > 1 {
        let mut rng = child_rng(seed, &[0x5245_5354]);
        for _ in 1..opts.restarts {
            let start = obj.class.random_params(&mut rng);
            let r = run(&start)?;
            if r.objective < best.objective {
                best = r;
            }
        }
        best.starts = opts.restarts;
    }
    Ok(best)
}
