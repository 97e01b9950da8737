//! Runs an experiment grid and scores every fit with the population oracle.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentId, Method, TaskSizes};
use crate::data::MultiTaskData;
use crate::error::{MolError, Result};
use crate::exec::map_slice;
use crate::hypclass::{Ball, FeatureMap, FiniteClass, GridLipschitzClass, HypothesisClass, LinearClass, Link, Model};
use crate::losses::{make_binary_entropy_loss, make_square_loss, make_square_loss_on, TaskLoss};
use crate::mol::{erm_mol, pl_mol, pl_mol_zero_one, MolConfig, TradeoffSolution};
use crate::oracle::{finite_tradeoff_minimizer, pointwise_tradeoff_optimum, population_excess_risks, Bound, PopulationSpec, Predictor};
use crate::rng::derive_seed;
use crate::scalarize::{Scalarization, ScalarizationKind};
use crate::solve::{fit, Objective, SolverOptions, TargetSource, Term};

type Candidates = Box<dyn Fn(&Scalarization) -> Vec<Model> + Send + Sync>;
type Generator = Box<dyn Fn(&[usize], &[usize], u64) -> Result<MultiTaskData> + Send + Sync>;

/// Which learner variant an experiment uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Learner {
    Bregman,
    /// Zero-one teachers and discrepancy over finite classes.
    ZeroOneFinite,
    /// Regression teachers with the weighted zero-one discrepancy.
    ZeroOneRegression,
}

/// Classes, losses, population and data generator of one experiment.
pub struct Problem {
    pub h: Vec<HypothesisClass>,
    pub g: HypothesisClass,
    pub train_losses: Vec<TaskLoss>,
    pub population: PopulationSpec,
    /// Evaluate `1{g(x) >= 1/2}` instead of `g(x)`.
    pub threshold: bool,
    learner: Learner,
    generator: Generator,
    /// Closed-form candidates for the reference optimum, as `G` models.
    candidates: Candidates,
}

impl Problem {
    pub fn generate(&self, sizes: &TaskSizes, seed: u64) -> Result<MultiTaskData> {
        (self.generator)(&sizes.n, &sizes.big_n, seed)
    }

    fn supports(&self, m: Method) -> bool {
        match (m, self.learner) {
            (Method::ErmMolH, Learner::ZeroOneRegression) => false,
            (Method::ErmMolH, _) => self.h.windows(2).all(|w| w[0] == w[1]),
            _ => true,
        }
    }
}

fn logistic_class(degree: u32, radius: f64) -> HypothesisClass {
    HypothesisClass::Linear(LinearClass::new(
        2,
        FeatureMap::Polynomial { degree },
        Ball::L2,
        radius,
        Link::Sigmoid { eps: crate::hypclass::DEFAULT_SIGMOID_CLIP },
    ))
}

fn no_candidates() -> Candidates {
    Box::new(|_| Vec::new())
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    match cfg.experiment {
        ExperimentId::LipschitzRegression => {
            let setup = cfg.lipschitz;
            let c = cfg.lipschitz_classes;
            let loss = TaskLoss::Bregman(make_square_loss(1));
            let hk = HypothesisClass::Grid(GridLipschitzClass::new(c.grid_h, Some(c.lipschitz_h)));
            let g = HypothesisClass::Grid(GridLipschitzClass::new(c.grid_g, Some(c.lipschitz_g)));
            let population = setup.population(c.quadrature_points, loss)?;
            let (pop, gc) = (population.clone(), g.clone());
            Ok(Problem {
                h: vec![hk.clone(), hk],
                g,
                train_losses: vec![loss; 2],
                population,
                threshold: false,
                learner: Learner::Bregman,
                generator: Box::new(move |n, m, s| setup.generate(n, m, s)),
                candidates: Box::new(move |s| {
                    let Ok(opt) = pointwise_tradeoff_optimum(&pop, s) else { return Vec::new() };
                    let HypothesisClass::Grid(grid) = &gc else { return Vec::new() };
                    let raw: Vec<f64> = (0..grid.grid_size).filter_map(|i| opt.predict(&[grid.node(i)]).ok()).collect();
                    if raw.len() != grid.grid_size {
                        return Vec::new();
                    }
                    vec![gc.project_model(&raw)]
                }),
            })
        }
        ExperimentId::LogisticHard | ExperimentId::LogisticEasy => {
            let lc = cfg.logistic_classes();
            let entropy = TaskLoss::Bregman(make_binary_entropy_loss(None));
            let hk = logistic_class(lc.degree_h, lc.radius_h);
            let g = logistic_class(lc.degree_g, lc.radius_g);
            let zero_one = cfg.zero_one_labels;
            let (population, generator): (PopulationSpec, Generator) = if cfg.experiment == ExperimentId::LogisticHard {
                let setup = cfg.logistic_hard.clone();
                let eval_loss = if zero_one { TaskLoss::ZeroOne } else { entropy };
                let pop = setup.population(eval_loss, zero_one)?;
                (pop, Box::new(move |n, m, s| setup.generate(n, m, zero_one, s)))
            } else {
                if zero_one {
                    return Err(MolError::Config("zero-one labels apply to logistic_hard only".into()));
                }
                let setup = cfg.logistic_easy;
                (setup.population(entropy)?, Box::new(move |n, m, s| setup.generate(n, m, s)))
            };
            Ok(Problem {
                h: vec![hk.clone(), hk],
                g,
                train_losses: vec![entropy; 2],
                population,
                threshold: zero_one,
                learner: Learner::Bregman,
                generator,
                candidates: no_candidates(),
            })
        }
        ExperimentId::CoinInconsistency => {
            let p = cfg.coin.p;
            let class = HypothesisClass::Finite(FiniteClass::binary(vec![vec![0.0]])?);
            Ok(Problem {
                h: vec![class.clone(), class.clone()],
                g: class,
                train_losses: vec![TaskLoss::ZeroOne; 2],
                population: super::generators::coin_population(p)?,
                threshold: false,
                learner: Learner::ZeroOneFinite,
                generator: Box::new(move |n, m, s| super::generators::gen_coin(n[0], m[0], p, s)),
                candidates: no_candidates(),
            })
        }
        ExperimentId::L2LinearRegression => {
            let setup = cfg.l2_linear;
            setup.validate()?;
            let loss = TaskLoss::Bregman(make_square_loss_on(1, -1.0, 1.0));
            let class = HypothesisClass::Linear(LinearClass::new(setup.d, FeatureMap::Identity, Ball::L2, 1.0, Link::Identity));
            let gc = class.clone();
            Ok(Problem {
                h: vec![class.clone(), class.clone()],
                g: class,
                train_losses: vec![loss; 2],
                population: setup.population(loss)?,
                threshold: false,
                learner: Learner::Bregman,
                generator: Box::new(move |n, m, s| setup.generate(n, m, s)),
                // equal second moments: the linear optimum averages the truths
                candidates: Box::new(move |s| {
                    if s.kind != ScalarizationKind::Linear {
                        return Vec::new();
                    }
                    let mut w = vec![0.0; setup.d];
                    for (k, l) in s.weights.as_slice().iter().enumerate() {
                        for (wi, ti) in w.iter_mut().zip(setup.truth(k)) {
                            *wi += l * ti;
                        }
                    }
                    vec![gc.project_model(&w)]
                }),
            })
        }
        ExperimentId::ZeroOneRegression => {
            let setup = cfg.finite_binary;
            let theta = HypothesisClass::Grid(GridLipschitzClass::new(setup.points, None));
            let g = HypothesisClass::Finite(FiniteClass::binary(setup.domain())?);
            Ok(Problem {
                h: vec![theta.clone(), theta],
                g,
                train_losses: vec![TaskLoss::ZeroOne; 2],
                population: setup.population()?,
                threshold: false,
                learner: Learner::ZeroOneRegression,
                generator: Box::new(move |n, m, s| setup.generate(n, m, s)),
                candidates: no_candidates(),
            })
        }
    }
}

/// Reference optimum `inf_G s(E(g))` for one scalarization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub scalarization: String,
    pub value: f64,
    /// `finite`, `pointwise_zero_one` or `fit`.
    pub method: String,
}

struct Thresholded<'a>(&'a dyn Predictor);

impl Predictor for Thresholded<'_> {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok((self.0.predict(x)? >= 0.5) as u8 as f64)
    }

    fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.0.predict_all(xs)?.into_iter().map(|v| (v >= 0.5) as u8 as f64).collect())
    }
}

/// Per-task population excess risks of a model of `class`.
pub fn evaluate_model(problem: &Problem, class: &HypothesisClass, model: &Model) -> Result<Vec<f64>> {
    let bound = Bound::new(class, model)?;
    if problem.threshold {
        population_excess_risks(&problem.population, &Thresholded(&bound))
    } else {
        population_excess_risks(&problem.population, &bound)
    }
}

/// Objective whose value is the population trade-off of a `G` model.
pub fn population_objective(problem: &Problem, class: &HypothesisClass, s: &Scalarization) -> Result<Objective> {
    let mut terms = Vec::new();
    for t in &problem.population.tasks {
        let keep: Vec<usize> = (0..t.points.len()).filter(|&j| t.weights[j] > 0.0).collect();
        let xs: Vec<Vec<f64>> = keep.iter().map(|&j| t.points[j].clone()).collect();
        terms.push(
            Term::new(t.loss, Arc::new(class.design(&xs)?), Arc::new(keep.iter().map(|&j| t.bayes[j]).collect()), TargetSource::Population)
                .weighted(Arc::new(keep.iter().map(|&j| t.weights[j]).collect())),
        );
    }
    Objective::new(class.clone(), terms, s.clone())
}

/// Best population trade-off over `class` by a high-budget fit, warm started
/// from `candidates`. Returns the trade-off value and the model.
pub fn population_fit(
    problem: &Problem,
    class: &HypothesisClass,
    s: &Scalarization,
    candidates: &[Model],
    cfg: &ExperimentConfig,
) -> Result<(f64, Model)> {
    let obj = population_objective(problem, class, s)?;
    let opts = SolverOptions::with_tol(cfg.tolerances.scaled_budget(cfg.reference_budget));
    let mut starts: Vec<Option<&Model>> = vec![None];
    starts.extend(candidates.iter().map(Some));
    let mut best: Option<(f64, Model)> = None;
    for (i, init) in starts.into_iter().enumerate() {
        let report = fit(&obj, init, &opts, derive_seed(cfg.seed_base, &[0xEF, i as u64]))?;
        let v = s.scalarize(&evaluate_model(problem, class, &report.model)?)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, report.model));
        }
        if let Some(m) = init {
            let v = s.scalarize(&evaluate_model(problem, class, m)?)?;
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, m.clone()));
            }
        }
    }
    Ok(best.expect("at least one start"))
}

/// Infimum over all measurable functions of a linear zero-one trade-off on a
/// shared support: each point picks its cheaper label.
fn pointwise_zero_one_reference(spec: &PopulationSpec, s: &Scalarization) -> Result<f64> {
    if s.kind != ScalarizationKind::Linear {
        return Err(MolError::Unsupported("zero-one reference needs a linear scalarization".into()));
    }
    let pts = &spec.tasks[0].points;
    if spec.tasks.iter().any(|t| &t.points != pts) {
        return Err(MolError::Unsupported("tasks must share their support".into()));
    }
    let lambda = s.weights.as_slice();
    let mut total = 0.0;
    for j in 0..pts.len() {
        let cost = |y: f64| -> f64 {
            spec.tasks
                .iter()
                .zip(lambda)
                .map(|(t, l)| {
                    let b = t.bayes[j];
                    let best = (b >= 0.5) as u8 as f64;
                    l * t.weights[j] * (2.0 * b - 1.0).abs() * (y != best) as u8 as f64
                })
                .sum()
        };
        total += cost(0.0).min(cost(1.0));
    }
    Ok(total)
}

pub fn compute_reference(problem: &Problem, s: &Scalarization, cfg: &ExperimentConfig) -> Result<Reference> {
    let label = s.label();
    if let HypothesisClass::Finite(fc) = &problem.g {
        let (_, v) = finite_tradeoff_minimizer(&problem.population, fc, s)?;
        return Ok(Reference { scalarization: label, value: v, method: "finite".into() });
    }
    if problem.threshold {
        let v = pointwise_zero_one_reference(&problem.population, s)?;
        return Ok(Reference { scalarization: label, value: v, method: "pointwise_zero_one".into() });
    }
    let (v, _) = population_fit(problem, &problem.g, s, &(problem.candidates)(s), cfg)?;
    Ok(Reference { scalarization: label, value: v, method: "fit".into() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub scalarization: String,
    pub weights: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub sizes: String,
    pub seed: u64,
    pub excess: f64,
    pub excess_risks: Vec<f64>,
    pub status: String,
    #[serde(skip)]
    pub wall_time: f64,
}

impl ResultRow {
    pub fn sort_key(&self) -> (String, String, String, usize, usize, String, u64) {
        (self.method.clone(), self.scalarization.clone(), self.weights.clone(), self.n, self.big_n, self.sizes.clone(), self.seed)
    }
}

pub fn sizes_label(s: &TaskSizes) -> String {
    let j = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    format!("{}|{}", j(&s.n), j(&s.big_n))
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub references: Vec<Reference>,
}

fn run_method(
    problem: &Problem,
    method: Method,
    data: &MultiTaskData,
    scalarizations: &[Scalarization],
    mol: &MolConfig,
    seed: u64,
) -> Result<TradeoffSolution> {
    match method {
        Method::PlMol => match problem.learner {
            Learner::ZeroOneRegression => pl_mol_zero_one(data, &problem.h, &problem.g, scalarizations, mol, seed),
            _ => pl_mol(data, &problem.h, &problem.g, &problem.train_losses, scalarizations, mol, seed),
        },
        Method::ErmMolH => erm_mol(data, &problem.h[0], &problem.train_losses, scalarizations, mol, seed),
        Method::ErmMolG => erm_mol(data, &problem.g, &problem.train_losses, scalarizations, mol, seed),
    }
}

struct Job {
    sizes: TaskSizes,
    seed: u64,
}

fn run_job(problem: &Problem, cfg: &ExperimentConfig, scal: &[Scalarization], refs: &[Reference], job: &Job) -> Vec<ResultRow> {
    let mol = MolConfig { solver: SolverOptions::with_tol(cfg.tolerances), reuse_labeled: cfg.reuse_labeled, execution: cfg.execution };
    let sizes = sizes_label(&job.sizes);
    let mut key: Vec<u64> = job.sizes.n.iter().chain(&job.sizes.big_n).map(|v| *v as u64).collect();
    let data = problem.generate(&job.sizes, derive_seed(job.seed, &key));
    key.push(0);
    let mut rows = Vec::new();
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let row = |s: &Scalarization, excess: f64, risks: Vec<f64>, status: String, t: f64| ResultRow {
            experiment: cfg.experiment.name().into(),
            method: method.name().into(),
            scalarization: s.kind.name().into(),
            weights: s.weights.label(),
            n: job.sizes.n[0],
            big_n: job.sizes.big_n[0],
            sizes: sizes.clone(),
            seed: job.seed,
            excess,
            excess_risks: risks,
            status,
            wall_time: t,
        };
        let fail = |reason: String| scal.iter().map(|s| row(s, f64::NAN, Vec::new(), format!("error: {reason}"), 0.0)).collect::<Vec<_>>();
        if !problem.supports(method) {
            rows.extend(fail("unsupported for this experiment".into()));
            continue;
        }
        let data = match &data {
            Ok(d) => d,
            Err(e) => {
                rows.extend(fail(e.to_string()));
                continue;
            }
        };
        *key.last_mut().unwrap() = mi as u64 + 1;
        let start = Instant::now();
        let sol = run_method(problem, method, data, scal, &mol, derive_seed(job.seed, &key));
        let elapsed = start.elapsed().as_secs_f64();
        match sol {
            Err(e) => rows.extend(fail(e.to_string())),
            Ok(sol) => {
                for (entry, (s, r)) in sol.entries.iter().zip(scal.iter().zip(refs)) {
                    let scored = evaluate_model(problem, &sol.class, &entry.model).and_then(|risks| Ok((s.scalarize(&risks)? - r.value, risks)));
                    rows.push(match scored {
                        Ok((ex, risks)) => row(s, ex, risks, "ok".into(), elapsed),
                        Err(e) => row(s, f64::NAN, Vec::new(), format!("error: {e}"), elapsed),
                    });
                }
            }
        }
    }
    rows
}

fn run_jobs(problem: &Problem, cfg: &ExperimentConfig, scal: &[Scalarization], refs: &[Reference], jobs: &[Job]) -> Vec<ResultRow> {
    let go = || map_slice(jobs, cfg.execution, |j| run_job(problem, cfg, scal, refs, j));
    #[cfg(feature = "parallel")]
    if let (Some(w), crate::exec::Execution::Parallel) = (cfg.workers, cfg.execution) {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            return pool.install(go).into_iter().flatten().collect();
        }
    }
    go().into_iter().flatten().collect()
}

/// Runs every `(sizes, seed)` job and returns rows in canonical order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let scal = cfg.scalarization_list()?;
    let refs = scal.iter().map(|s| compute_reference(&problem, s, cfg)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<Job> = cfg
        .size_grid()
        .into_iter()
        .flat_map(|sizes| (0..cfg.seeds as u64).map(move |i| (sizes.clone(), i)))
        .map(|(sizes, i)| Job { sizes, seed: cfg.seed_base + i })
        .collect();
    let mut rows = run_jobs(&problem, cfg, &scal, &refs, &jobs);
    rows.sort_by_key(|a| a.sort_key());
    Ok(RunOutput { rows, references: refs })
}

/// Trade-off excess of the best `H` model relative to the `G` reference.
pub fn bias_gap(problem: &Problem, s: &Scalarization, cfg: &ExperimentConfig) -> Result<f64> {
    let reference = compute_reference(problem, s, cfg)?;
    let (v, _) = population_fit(problem, &problem.h[0], s, &[], cfg)?;
    Ok(v - reference.value)
}
