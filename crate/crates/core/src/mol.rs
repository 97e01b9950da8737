//! Learners for scalarized multi-task trade-offs.
//!
//! `pl_mol` fits one teacher per task on labeled data and then minimizes the
//! scalarized discrepancy to the teachers' pseudo-labels on unlabeled data:
//!
//! ```text
//! h_k = argmin_{H_k} R_k(h)         g_s = argmin_G s(d_1(g; h_1), ..., d_K(g; h_K))
//! ```
//!
//! `erm_mol` minimizes `s(R_1(g), ..., R_K(g))` on the labeled data directly.
//! `pl_mol_zero_one` is the classification variant with regression teachers
//! and the weighted zero-one discrepancy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{MultiTaskData, TaskData};
use crate::error::{MolError, Result};
use crate::exec::{map_indexed, Execution};
use crate::hypclass::{HypothesisClass, Model};
use crate::losses::{make_square_loss, TaskLoss};
use crate::oracle::{FnPredictor, PopulationSpec};
use crate::rng::derive_seed;
use crate::scalarize::{Scalarization, ScalarizationKind, WeightVector};
use crate::solve::{fit, FitReport, Objective, SolverOptions, TargetSource, Term};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct MolConfig {
    pub solver: SolverOptions,
    /// Add labeled covariates to the unlabeled pool in the second stage.
    pub reuse_labeled: bool,
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub objective: f64,
    pub iterations: usize,
    pub grad_map_norm: f64,
    pub converged: bool,
}

impl From<&FitReport> for FitSummary {
    fn from(r: &FitReport) -> Self {
        Self { objective: r.objective, iterations: r.iterations, grad_map_norm: r.grad_map_norm, converged: r.converged }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffEntry {
    pub kind: ScalarizationKind,
    pub weights: WeightVector,
    pub model: Model,
    pub fit: FitSummary,
    /// Every point received zero weight, so all members tie.
    #[serde(default)]
    pub degenerate: bool,
}

impl TradeoffEntry {
    pub fn scalarization(&self) -> Scalarization {
        Scalarization::new(self.kind, self.weights.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSolution {
    pub method: String,
    pub class: HypothesisClass,
    pub entries: Vec<TradeoffEntry>,
    pub teacher_classes: Vec<HypothesisClass>,
    pub teachers: Vec<Model>,
    pub seed: u64,
    pub config_hash: String,
}

impl TradeoffSolution {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn config_hash(cfg: &MolConfig, extra: &str) -> String {
    let mut h = Sha256::new();
    // execution mode does not change results
    h.update(serde_json::to_vec(&(&cfg.solver, cfg.reuse_labeled)).expect("config serializes"));
    h.update(extra.as_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn check_inputs(data: &MultiTaskData, losses: &[TaskLoss], scalarizations: &[Scalarization]) -> Result<()> {
    let k = data.num_tasks();
    if losses.len() != k {
        return Err(MolError::Shape(format!("{} losses for {k} tasks", losses.len())));
    }
    if scalarizations.is_empty() {
        return Err(MolError::Config("no scalarizations".into()));
    }
    if scalarizations.iter().any(|s| s.num_tasks() != k) {
        return Err(MolError::Shape("scalarization length differs from the number of tasks".into()));
    }
    for (t, l) in data.tasks.iter().zip(losses) {
        if t.label_dim() != 1 {
            return Err(MolError::Unsupported("scalar labels only".into()));
        }
        if let TaskLoss::Bregman(b) = l {
            for s in &t.labeled {
                b.phi(&s.y)?;
            }
        }
    }
    Ok(())
}

fn labeled_term(class: &HypothesisClass, task: &TaskData, loss: TaskLoss) -> Result<Term> {
    let design = class.design(&task.labeled_x())?;
    Ok(Term::new(loss, Arc::new(design), Arc::new(task.labels_flat()), TargetSource::Labels))
}

/// Empirical risk minimizer of one task over `class`.
pub fn fit_task(class: &HypothesisClass, task: &TaskData, loss: TaskLoss, cfg: &MolConfig, seed: u64) -> Result<FitReport> {
    let obj = Objective::single(class.clone(), labeled_term(class, task, loss)?)?;
    fit(&obj, None, &cfg.solver, seed)
}

fn stage_two_covariates(task: &TaskData, reuse_labeled: bool) -> Vec<Vec<f64>> {
    let mut xs = task.unlabeled.clone();
    if reuse_labeled || xs.is_empty() {
        xs.extend(task.labeled_x());
    }
    xs
}

fn fit_entries(
    g: &HypothesisClass,
    terms: &[Term],
    scalarizations: &[Scalarization],
    warm_starts: &[Model],
    cfg: &MolConfig,
    seed: u64,
) -> Result<Vec<TradeoffEntry>> {
    let results = map_indexed(scalarizations.len(), cfg.execution, |i| -> Result<TradeoffEntry> {
        let s = &scalarizations[i];
        let obj = Objective::new(g.clone(), terms.to_vec(), s.clone())?;
        let init = warm_starts
            .iter()
            .map(|m| (obj.value(&m.params), m))
            .fold(None::<(f64, &Model)>, |best, (v, m)| match best {
                Some((bv, _)) if bv <= v => best,
                _ if v.is_finite() => Some((v, m)),
                _ => best,
            })
            .map(|(_, m)| m);
        let degenerate = g.is_finite()
            && terms
                .iter()
                .zip(s.weights.as_slice())
                .all(|(t, &l)| l == 0.0 || t.point_weights.as_ref().is_some_and(|w| w.iter().all(|v| *v == 0.0)));
        let report = fit(&obj, init, &cfg.solver, derive_seed(seed, &[i as u64]))?;
        Ok(TradeoffEntry { kind: s.kind, weights: s.weights.clone(), fit: FitSummary::from(&report), model: report.model, degenerate })
    });
    results.into_iter().collect()
}

/// Fits one teacher per task and returns the teachers with their reports.
pub fn fit_teachers(data: &MultiTaskData, h: &[HypothesisClass], losses: &[TaskLoss], cfg: &MolConfig, seed: u64) -> Result<Vec<FitReport>> {
    if h.len() != data.num_tasks() {
        return Err(MolError::Shape(format!("{} classes for {} tasks", h.len(), data.num_tasks())));
    }
    map_indexed(data.num_tasks(), cfg.execution, |k| fit_task(&h[k], &data.tasks[k], losses[k], cfg, derive_seed(seed, &[1, k as u64])))
        .into_iter()
        .collect()
}

/// Pseudo-labeling multi-objective learner.
pub fn pl_mol(
    data: &MultiTaskData,
    h: &[HypothesisClass],
    g: &HypothesisClass,
    losses: &[TaskLoss],
    scalarizations: &[Scalarization],
    cfg: &MolConfig,
    seed: u64,
) -> Result<TradeoffSolution> {
    check_inputs(data, losses, scalarizations)?;
    let teachers = fit_teachers(data, h, losses, cfg, seed)?;
    pl_mol_with_teachers(data, h, g, losses, scalarizations, &teachers.iter().map(|r| r.model.clone()).collect::<Vec<_>>(), cfg, seed)
}

/// Second stage of `pl_mol` for given teachers.
#[allow(clippy::too_many_arguments)]
pub fn pl_mol_with_teachers(
    data: &MultiTaskData,
    h: &[HypothesisClass],
    g: &HypothesisClass,
    losses: &[TaskLoss],
    scalarizations: &[Scalarization],
    teachers: &[Model],
    cfg: &MolConfig,
    seed: u64,
) -> Result<TradeoffSolution> {
    check_inputs(data, losses, scalarizations)?;
    let mut terms = Vec::with_capacity(data.num_tasks());
    for (k, task) in data.tasks.iter().enumerate() {
        let xs = stage_two_covariates(task, cfg.reuse_labeled);
        let targets = h[k].predict_batch(&teachers[k].params, &xs)?;
        terms.push(Term::new(
            losses[k],
            Arc::new(g.design(&xs)?),
            Arc::new(targets),
            TargetSource::PseudoLabels { teacher: teachers[k].class_id.clone() },
        ));
    }
    let warm: Vec<Model> = h.iter().zip(teachers).filter_map(|(c, m)| c.embed(m, g).ok()).collect();
    let entries = fit_entries(g, &terms, scalarizations, &warm, cfg, derive_seed(seed, &[2]))?;
    Ok(TradeoffSolution {
        method: "pl_mol".into(),
        class: g.clone(),
        entries,
        teacher_classes: h.to_vec(),
        teachers: teachers.to_vec(),
        seed,
        config_hash: config_hash(cfg, &g.descriptor()),
    })
}

/// Scalarized empirical risk minimization on labeled data only.
pub fn erm_mol(
    data: &MultiTaskData,
    g: &HypothesisClass,
    losses: &[TaskLoss],
    scalarizations: &[Scalarization],
    cfg: &MolConfig,
    seed: u64,
) -> Result<TradeoffSolution> {
    check_inputs(data, losses, scalarizations)?;
    let terms = data.tasks.iter().zip(losses).map(|(t, l)| labeled_term(g, t, *l)).collect::<Result<Vec<_>>>()?;
    let entries = fit_entries(g, &terms, scalarizations, &[], cfg, derive_seed(seed, &[3]))?;
    Ok(TradeoffSolution {
        method: "erm_mol".into(),
        class: g.clone(),
        entries,
        teacher_classes: Vec::new(),
        teachers: Vec::new(),
        seed,
        config_hash: config_hash(cfg, &g.descriptor()),
    })
}

/// Classification variant: squared-loss regression teachers clamped to
/// `[0, 1]`, then the weighted zero-one discrepancy
/// `mean_i |2 theta(x_i) - 1| 1{g(x_i) != 1{theta(x_i) >= 1/2}}` over a finite `G`.
pub fn pl_mol_zero_one(
    data: &MultiTaskData,
    theta: &[HypothesisClass],
    g: &HypothesisClass,
    scalarizations: &[Scalarization],
    cfg: &MolConfig,
    seed: u64,
) -> Result<TradeoffSolution> {
    if !g.is_finite() {
        return Err(MolError::Unsupported("the zero-one discrepancy is minimized by enumeration over a finite G".into()));
    }
    let square = vec![TaskLoss::Bregman(make_square_loss(1)); data.num_tasks()];
    check_inputs(data, &square, scalarizations)?;
    for t in &data.tasks {
        if t.labeled.iter().any(|s| s.y[0] != 0.0 && s.y[0] != 1.0) {
            return Err(MolError::Domain("binary labels expected".into()));
        }
    }
    let teachers = fit_teachers(data, theta, &square, cfg, seed)?;
    let mut terms = Vec::with_capacity(data.num_tasks());
    for (k, task) in data.tasks.iter().enumerate() {
        let xs = stage_two_covariates(task, cfg.reuse_labeled);
        let probs: Vec<f64> = theta[k].predict_batch(&teachers[k].model.params, &xs)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let n = xs.len() as f64;
        let targets: Vec<f64> = probs.iter().map(|p| (*p >= 0.5) as u8 as f64).collect();
        let weights: Vec<f64> = probs.iter().map(|p| (2.0 * p - 1.0).abs() / n).collect();
        terms.push(
            Term::new(
                TaskLoss::ZeroOne,
                Arc::new(g.design(&xs)?),
                Arc::new(targets),
                TargetSource::PseudoLabels { teacher: teachers[k].model.class_id.clone() },
            )
            .weighted(Arc::new(weights)),
        );
    }
    let entries = fit_entries(g, &terms, scalarizations, &[], cfg, derive_seed(seed, &[4]))?;
    Ok(TradeoffSolution {
        method: "pl_mol".into(),
        class: g.clone(),
        entries,
        teacher_classes: theta.to_vec(),
        teachers: teachers.into_iter().map(|r| r.model).collect(),
        seed,
        config_hash: config_hash(cfg, "zero_one"),
    })
}

fn coin_setup(n: usize, p: [f64; 2], seed: u64) -> Result<(MultiTaskData, HypothesisClass, PopulationSpec)> {
    let data = crate::bench::generators::gen_coin(n, n, p, seed)?;
    let class = HypothesisClass::Finite(crate::hypclass::FiniteClass::binary(vec![vec![0.0]])?);
    let spec = crate::bench::generators::coin_population(p)?;
    Ok((data, class, spec))
}

fn coin_excess(spec: &PopulationSpec, s: &Scalarization, y: f64) -> Result<f64> {
    let value = |v: f64| crate::oracle::tradeoff_value(spec, s, &FnPredictor(move |_: &[f64]| v));
    Ok(value(y)? - value(0.0)?.min(value(1.0)?))
}

/// Zero-one pseudo-labeling on a single-point domain; returns the chosen label
/// and its trade-off excess.
pub fn coin_example_pl(n: usize, lambda: [f64; 2], p: [f64; 2], seed: u64) -> Result<(f64, f64)> {
    let (data, class, spec) = coin_setup(n, p, seed)?;
    let s = Scalarization::linear(lambda.to_vec())?;
    let cfg = MolConfig { execution: Execution::Sequential, ..MolConfig::default() };
    let sol = pl_mol(&data, &[class.clone(), class.clone()], &class, &[TaskLoss::ZeroOne; 2], std::slice::from_ref(&s), &cfg, seed)?;
    let y = sol.entries[0].model.params[0];
    Ok((y, coin_excess(&spec, &s, y)?))
}

/// Zero-one ERM baseline for the same setting.
pub fn coin_example_erm(n: usize, lambda: [f64; 2], p: [f64; 2], seed: u64) -> Result<(f64, f64)> {
    let (data, class, spec) = coin_setup(n, p, seed)?;
    let s = Scalarization::linear(lambda.to_vec())?;
    let cfg = MolConfig { execution: Execution::Sequential, ..MolConfig::default() };
    let sol = erm_mol(&data, &class, &[TaskLoss::ZeroOne; 2], std::slice::from_ref(&s), &cfg, seed)?;
    let y = sol.entries[0].model.params[0];
    Ok((y, coin_excess(&spec, &s, y)?))
}
