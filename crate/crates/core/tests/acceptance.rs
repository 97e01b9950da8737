//! End-to-end checks, one status line per criterion.

use std::sync::Arc;
use std::time::{Duration, Instant};

use moltk::bench::config::{ExperimentConfig, ExperimentId, Method, WeightSpec};
use moltk::bench::generators::{coin_population, L2LinearSetup, LipschitzSetup};
use moltk::bench::output::rows_to_csv;
use moltk::bench::runner::{bias_gap, build_problem, ResultRow};
use moltk::bench::{fit_rate, run_experiment, GroupCol};
use moltk::complexity::{check_ratio_monotone, critical_radius, localized_rademacher, TaskNorm};
use moltk::data::Tolerances;
use moltk::hypclass::{Ball, FeatureMap, GridLipschitzClass, LinearClass, Link};
use moltk::losses::{make_square_loss, make_square_loss_on};
use moltk::mol::{coin_example_erm, coin_example_pl};
use moltk::numeric::{median, ulp, ulp_distance};
use moltk::oracle::{bayes_discrepancies, pointwise_tradeoff_optimum, population_excess_risks, FnPredictor};
use moltk::rng::{rng_from_seed, StreamRng};
use moltk::scalarize::{weight_grid, ScalarizationKind};
use moltk::solve::{fit, Objective, SolverOptions, TargetSource, Term};
use moltk::{Execution, HypothesisClass, Scalarization, TaskLoss, WeightVector};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

mod common;
use common::{random_objective, random_spec};

fn report(name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) -> bool {
    let in_time = elapsed <= budget;
    let ok = pass && in_time;
    println!("{} {name}: {detail} [{:.2}s of {:.0}s]", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64(), budget.as_secs_f64());
    ok
}

fn medians_by(rows: &[ResultRow], method: &str) -> Vec<(String, f64)> {
    let mut labels: Vec<String> = rows.iter().filter(|r| r.method == method).map(|r| r.weights.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .map(|w| {
            let v: Vec<f64> = rows.iter().filter(|r| r.method == method && r.weights == w && r.status == "ok").map(|r| r.excess).collect();
            (w, median(&v))
        })
        .collect()
}

fn zero_one_pseudo_labeling_is_inconsistent() -> bool {
    let t = Instant::now();
    let (mut pl_in, mut erm_in) = (0, 0);
    let mut pl_vals = Vec::new();
    for seed in 0..20 {
        let (_, pl) = coin_example_pl(10_000, [0.25, 0.75], [1.0, 0.4], seed).unwrap();
        let (_, erm) = coin_example_erm(10_000, [0.25, 0.75], [1.0, 0.4], seed).unwrap();
        pl_in += (0.09..=0.11).contains(&pl) as usize;
        erm_in += (erm <= 0.02) as usize;
        pl_vals.push(pl);
    }
    report(
        "zero_one_inconsistency",
        pl_in >= 19 && erm_in >= 19,
        format!("PL excess in [0.09,0.11] for {pl_in}/20 (median {:.6}), ERM <= 0.02 for {erm_in}/20", median(&pl_vals)),
        t.elapsed(),
        Duration::from_secs(10),
    )
}

fn bregman_excess_is_the_divergence_to_bayes() -> bool {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        for loss in [TaskLoss::Bregman(make_square_loss(1)), TaskLoss::Bregman(moltk::losses::make_binary_entropy_loss(None))] {
            let spec = random_spec(seed, loss);
            let m = spec.tasks[0].points.len();
            let mut rng = rng_from_seed(50_000 + seed);
            for _ in 0..50 {
                let vals: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
                let f = FnPredictor(move |x: &[f64]| vals[x[0] as usize]);
                let e = population_excess_risks(&spec, &f).unwrap();
                let d = bayes_discrepancies(&spec, &f).unwrap();
                worst = e.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            }
        }
    }
    let coin = coin_population([1.0, 0.4]).unwrap();
    let one = FnPredictor(|_: &[f64]| 1.0);
    let e = population_excess_risks(&coin, &one).unwrap();
    let d = bayes_discrepancies(&coin, &one).unwrap();
    let gap = e.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report(
        "bregman_identity",
        worst <= 1e-10 && gap > 0.05,
        format!("max |E - d| = {worst:.3e} over 10000 models, zero-one gap on the coin = {gap:.3}"),
        t.elapsed(),
        Duration::from_secs(5),
    )
}

fn numerical_tradeoff_optimum_matches_closed_form() -> bool {
    let t = Instant::now();
    let points = 513;
    let setup = LipschitzSetup { a: 0.3, b: 0.7, ..LipschitzSetup::default() };
    let loss = TaskLoss::Bregman(make_square_loss(1));
    let spec = setup.population(points, loss).unwrap();
    let class = HypothesisClass::Grid(GridLipschitzClass::new(points, None));
    let design = Arc::new(class.design(&spec.tasks[0].points).unwrap());
    let opts = SolverOptions::with_tol(Tolerances { opt_rel_tol: 1e-10, max_iters: 200_000, constraint_tol: 1e-12 });
    let mut worst: f64 = 0.0;
    for w in weight_grid(2, 5).unwrap() {
        let s = Scalarization::new(ScalarizationKind::Linear, w.clone());
        let terms = spec
            .tasks
            .iter()
            .map(|task| Term::new(loss, design.clone(), Arc::new(task.bayes.clone()), TargetSource::Labels).weighted(Arc::new(task.weights.clone())))
            .collect();
        let obj = Objective::new(class.clone(), terms, s.clone()).unwrap();
        let fitted = fit(&obj, None, &opts, 0).unwrap();
        let closed = pointwise_tradeoff_optimum(&spec, &s).unwrap();
        // ||f||_s^2 = sum_k lambda_k E_k f^2
        let mut sq = 0.0;
        for (task, l) in spec.tasks.iter().zip(w.as_slice()) {
            for j in 0..points {
                sq += l * task.weights[j] * (fitted.model.params[j] - closed.values[j]).powi(2);
            }
        }
        worst = worst.max(sq.sqrt());
    }
    report(
        "closed_form_optimum",
        worst <= 1e-3,
        format!("max ||fit - closed form||_s = {worst:.3e} over 5 weights"),
        t.elapsed(),
        Duration::from_secs(30),
    )
}

fn lipschitz_sweep(labeled: Vec<usize>, unlabeled: Vec<usize>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(ExperimentId::LipschitzRegression);
    cfg.seed_base = 0;
    cfg.seeds = 10;
    cfg.labeled = labeled;
    cfg.unlabeled = unlabeled;
    cfg.weights = WeightSpec::List(vec![vec![0.5, 0.5]]);
    cfg.methods = vec![Method::PlMol];
    cfg
}

fn lipschitz_regression_rates() -> bool {
    let t = Instant::now();
    let sizes: Vec<usize> = (5..=11).map(|e| 1 << e).collect();
    let lab = run_experiment(&lipschitz_sweep(sizes.clone(), vec![4096])).unwrap();
    let unl = run_experiment(&lipschitz_sweep(vec![4096], sizes)).unwrap();
    let a = fit_rate(&lab.rows, GroupCol::Labeled).unwrap();
    let b = fit_rate(&unl.rows, GroupCol::Unlabeled).unwrap();
    let (sa, sb) = (a.slope, b.slope);
    let inside = |s: f64| (-0.83..=-0.52).contains(&s);
    report(
        "lipschitz_rates",
        inside(sa) && inside(sb),
        format!("labeled sweep slope {sa:.3} (se {:.3}), unlabeled sweep slope {sb:.3} (se {:.3})", a.std_error, b.std_error),
        t.elapsed(),
        Duration::from_secs(600),
    )
}

fn unlabeled_data_beats_labeled_only_fits() -> bool {
    let t = Instant::now();
    let mut cfg = lipschitz_sweep(vec![32], vec![4096]);
    cfg.methods = vec![Method::PlMol, Method::ErmMolG, Method::ErmMolH];
    let out = run_experiment(&cfg).unwrap();
    let pl = medians_by(&out.rows, "pl_mol")[0].1;
    let erm_g = medians_by(&out.rows, "erm_mol_G")[0].1;
    let erm_h = medians_by(&out.rows, "erm_mol_H")[0].1;
    let problem = build_problem(&cfg).unwrap();
    let s = Scalarization::linear(vec![0.5, 0.5]).unwrap();
    let gap = bias_gap(&problem, &s, &cfg).unwrap();
    report(
        "semi_supervised_advantage",
        pl <= 0.5 * erm_g && gap > 0.0 && erm_h >= 0.9 * gap,
        format!("median PL {pl:.3e} vs 0.5 x ERM-G {:.3e}; median ERM-H {erm_h:.3e} vs bias gap {gap:.3e} (ratio {:.2})", 0.5 * erm_g, erm_h / gap),
        t.elapsed(),
        Duration::from_secs(120),
    )
}

fn scalarizations_are_monotone_seminorms() -> bool {
    let t = Instant::now();
    let mut rng = rng_from_seed(77);
    let (mut worst_tri, mut worst_hom) = (0.0_f64, 0u64);
    let mut violations = 0usize;
    let random_vec = |rng: &mut StreamRng, k: usize| -> Vec<f64> { (0..k).map(|_| rng.random::<f64>()).collect() };
    for kind in [ScalarizationKind::Linear, ScalarizationKind::Tchebycheff] {
        for _ in 0..10_000 {
            let k = rng.random_range(2..=4);
            let lambda = WeightVector::normalized(random_vec(&mut rng, k).iter().map(|x| x + 1e-3).collect()).unwrap();
            let s = Scalarization::new(kind, lambda);
            let v = random_vec(&mut rng, k);
            let w = random_vec(&mut rng, k);
            let alpha = rng.random_range(0.0..10.0);
            let (sv, sw) = (s.scalarize(&v).unwrap(), s.scalarize(&w).unwrap());
            let diff: Vec<f64> = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).collect();
            let bound = s.scalarize(&diff).unwrap();
            // the subtraction sv - sw is exact only up to ulps of its operands
            let excess = ((sv - sw).abs() - bound).max(0.0) / ulp(sv.max(sw));
            worst_tri = worst_tri.max(excess);
            violations += (excess > 4.0) as usize;
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            let d = ulp_distance(s.scalarize(&scaled).unwrap(), alpha * sv);
            worst_hom = worst_hom.max(d);
            violations += (d > 4) as usize;
        }
    }
    report(
        "scalarization_contract",
        violations == 0,
        format!("20000 triples, {violations} beyond 4 ulp; worst reverse-triangle slack {worst_tri:.1} ulp, worst homogeneity gap {worst_hom} ulp"),
        t.elapsed(),
        Duration::from_secs(1),
    )
}

fn solver_gradients_and_least_squares() -> bool {
    let t = Instant::now();
    let mut worst_grad: f64 = 0.0;
    for seed in 0..200 {
        let (obj, p) = random_objective(seed);
        let mut g = vec![0.0; p.len()];
        obj.value_and_grad(&p, &mut g);
        for i in 0..p.len() {
            let h = 1e-6;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
            worst_grad = worst_grad.max((fd - g[i]).abs() / g[i].abs().max(1e-3));
        }
    }
    let mut worst_ls: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(2000 + seed);
        let (n, d) = (50, 4);
        let class = HypothesisClass::Linear(LinearClass::new(d, FeatureMap::Identity, Ball::L2, 1e6, Link::Identity));
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> =
            xs.iter().map(|x| x.iter().enumerate().map(|(j, v)| (j as f64 - 1.5) * v).sum::<f64>() + rng.random_range(-0.1..0.1)).collect();
        let loss = TaskLoss::Bregman(make_square_loss_on(1, -10.0, 10.0));
        let term = Term::new(loss, Arc::new(class.design(&xs).unwrap()), Arc::new(ys.clone()), TargetSource::Labels);
        let obj = Objective::single(class, term).unwrap();
        let opts = SolverOptions::with_tol(Tolerances { opt_rel_tol: 1e-12, max_iters: 100_000, constraint_tol: 1e-12 });
        let r = fit(&obj, None, &opts, 0).unwrap();
        let x = DMatrix::from_fn(n, d, |i, j| xs[i][j]);
        let w = (x.transpose() * &x).lu().solve(&(x.transpose() * DVector::from_vec(ys))).unwrap();
        for j in 0..d {
            worst_ls = worst_ls.max((r.model.params[j] - w[j]).abs());
        }
    }
    report(
        "solver_correctness",
        worst_grad <= 1e-4 && worst_ls <= 1e-7,
        format!("worst relative gradient error {worst_grad:.2e} on 200 objectives, worst least-squares error {worst_ls:.2e}"),
        t.elapsed(),
        Duration::from_secs(30),
    )
}

fn complexity_diagnostics() -> bool {
    let t = Instant::now();
    let setup = L2LinearSetup { d: 2, radius: 0.25, kappa: 0.5, noise: 0.1 };
    let class = HypothesisClass::Linear(LinearClass::new(2, FeatureMap::Identity, Ball::L2, setup.radius, Link::Identity));
    let center = class.model(vec![0.0, 0.0]);
    let norm = TaskNorm::SecondMoment(vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
    let sampler = |rng: &mut StreamRng| moltk::bench::generators::sphere(2, rng);
    let draws = 200;

    let grid: Vec<f64> = (0..8).map(|i| 0.01 * 2f64.powi(i)).collect();
    let evals: Vec<_> =
        grid.iter().map(|&r| (r, localized_rademacher(&class, &center, r, &norm, 256, &sampler, draws, 5, Execution::Parallel).unwrap())).collect();
    let monotone = check_ratio_monotone(&evals);

    let mut ratios = Vec::new();
    let mut radii = Vec::new();
    for n in [64usize, 256, 1024] {
        let cr = critical_radius(&class, &center, &norm, n, &sampler, draws, 9, 1.0, Execution::Parallel).unwrap();
        let bound = (1.0 / (setup.kappa * n as f64)).min(2.0 * setup.radius / (n as f64).sqrt());
        ratios.push(cr.r_star_sq() / bound);
        radii.push(cr.r_star_sq());
    }
    let within = ratios.iter().all(|q| (0.25..=4.0).contains(q));
    let decreasing = radii.windows(2).all(|w| w[1] < w[0]);
    report(
        "complexity_diagnostics",
        monotone.is_ok() && within && decreasing,
        format!(
            "ratio check {}, r*^2 / bound = {:.2?} at n = 64, 256, 1024, r*^2 = {}",
            if monotone.is_ok() { "ok" } else { "violated" },
            ratios,
            radii.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
        ),
        t.elapsed(),
        Duration::from_secs(120),
    )
}

fn logistic_pseudo_labeling_front_dominates() -> bool {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::default_for(ExperimentId::LogisticHard);
    cfg.seeds = 10;
    cfg.labeled = vec![25];
    cfg.unlabeled = vec![300];
    cfg.weights = WeightSpec::Grid(5);
    cfg.methods = vec![Method::PlMol, Method::ErmMolH];
    let out = run_experiment(&cfg).unwrap();
    let pl = medians_by(&out.rows, "pl_mol");
    let erm = medians_by(&out.rows, "erm_mol_H");
    let wins = pl.iter().zip(&erm).filter(|(a, b)| a.1 <= b.1 + 1e-6).count();
    let pairs: Vec<String> = pl.iter().zip(&erm).map(|(a, b)| format!("{}: {:.4}/{:.4}", a.0, a.1, b.1)).collect();
    report(
        "logistic_dominance",
        wins >= 4,
        format!("PL <= ERM at {wins}/5 weights (PL/ERM median excess {})", pairs.join(", ")),
        t.elapsed(),
        Duration::from_secs(300),
    )
}

fn reruns_are_byte_identical() -> bool {
    let t = Instant::now();
    let mut same = 0;
    for id in ExperimentId::ALL {
        let mut cfg = ExperimentConfig::default_for(id);
        cfg.seeds = 3;
        cfg.labeled = vec![cfg.labeled[0]];
        cfg.unlabeled = vec![cfg.unlabeled[0].min(512)];
        cfg.weights = WeightSpec::Grid(3);
        let a = rows_to_csv(&run_experiment(&cfg).unwrap().rows).unwrap();
        cfg.workers = Some(2);
        let b = rows_to_csv(&run_experiment(&cfg).unwrap().rows).unwrap();
        same += (a == b) as usize;
    }
    report(
        "determinism",
        same == ExperimentId::ALL.len(),
        format!("{same}/{} experiments reproduced byte-identical CSV", ExperimentId::ALL.len()),
        t.elapsed(),
        Duration::from_secs(600),
    )
}

type Check = fn() -> bool;

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("zero_one_pseudo_labeling_is_inconsistent", zero_one_pseudo_labeling_is_inconsistent),
        ("bregman_excess_is_the_divergence_to_bayes", bregman_excess_is_the_divergence_to_bayes),
        ("numerical_tradeoff_optimum_matches_closed_form", numerical_tradeoff_optimum_matches_closed_form),
        ("lipschitz_regression_rates", lipschitz_regression_rates),
        ("unlabeled_data_beats_labeled_only_fits", unlabeled_data_beats_labeled_only_fits),
        ("scalarizations_are_monotone_seminorms", scalarizations_are_monotone_seminorms),
        ("solver_gradients_and_least_squares", solver_gradients_and_least_squares),
        ("complexity_diagnostics", complexity_diagnostics),
        ("logistic_pseudo_labeling_front_dominates", logistic_pseudo_labeling_front_dominates),
        ("reruns_are_byte_identical", reruns_are_byte_identical),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        ran += 1;
        match std::panic::catch_unwind(check) {
            Ok(true) => {}
            Ok(false) => failed += 1,
            Err(_) => {
                println!("FAIL {name}: panicked");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
