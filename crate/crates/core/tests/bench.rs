use moltk::bench::config::{ExperimentConfig, ExperimentId, Method, WeightSpec};
use moltk::bench::generators::{gen_coin, L2LinearSetup, LipschitzSetup, LogisticEasySetup, LogisticHardSetup};
use moltk::bench::output::{read_rows_csv, rows_to_csv};
use moltk::bench::rate::{fit_rate, fit_rate_points, GroupCol};
use moltk::bench::run_experiment;
use moltk::bench::runner::ResultRow;
use moltk::losses::{make_square_loss_on, TaskLoss};
use moltk::numeric::sigmoid;
use moltk::{Execution, MolError};
use nalgebra::{Matrix2, SymmetricEigen};

#[test]
fn lipschitz_covariates_follow_the_density() {
    let setup = LipschitzSetup::default();
    let data = setup.generate(&[1, 1], &[100_000, 1], 42).unwrap();
    let bins = 20;
    let mut counts = vec![0usize; bins];
    for x in &data.tasks[0].unlabeled {
        counts[((x[0] * bins as f64) as usize).min(bins - 1)] += 1;
    }
    // bin probabilities by fine midpoint quadrature of the normalized density
    let fine = 2000;
    let mut mass = vec![0.0; bins];
    for i in 0..fine {
        let x = (i as f64 + 0.5) / fine as f64;
        mass[((x * bins as f64) as usize).min(bins - 1)] += setup.raw_density(0, x);
    }
    let z: f64 = mass.iter().sum();
    let chi2: f64 = counts
        .iter()
        .zip(&mass)
        .map(|(&c, m)| {
            let e = 100_000.0 * m / z;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 99th percentile of chi-square with 19 degrees of freedom
    assert!(chi2 < 36.191, "chi2 = {chi2}");
}

#[test]
fn lipschitz_labels_are_clipped_noise_around_the_mean() {
    let setup = LipschitzSetup { a: 0.02, ..LipschitzSetup::default() };
    let data = setup.generate(&[5000, 10], &[1, 1], 0).unwrap();
    assert!(data.tasks[0].labeled.iter().all(|s| (0.0..=0.12).contains(&s.y[0])));
    assert!(setup.generate(&[0, 10], &[1, 1], 0).is_err());
}

#[test]
fn logistic_hard_supports_are_nested() {
    let setup = LogisticHardSetup::default();
    let data = setup.generate(&[400, 400], &[300, 300], false, 1).unwrap();
    for (k, t) in data.tasks.iter().enumerate() {
        let r = setup.supports[k];
        assert!(t.labeled.iter().all(|s| r.contains(&s.x)));
        assert!(t.unlabeled.iter().all(|x| r.contains(x)));
    }
    let (a, b) = (setup.supports[0], setup.supports[1]);
    assert!(a.x0 <= b.x0 && b.x1 <= a.x1 && a.y0 <= b.y0 && b.y1 <= a.y1);
}

#[test]
fn logistic_hard_label_mean_matches_bayes() {
    let setup = LogisticHardSetup::default();
    let data = setup.generate(&[20_000, 1], &[1, 1], false, 2).unwrap();
    let pos: Vec<_> = data.tasks[0].labeled.iter().filter(|s| s.x[0] + s.x[1] > 0.0).collect();
    let n = pos.len() as f64;
    let ybar = pos.iter().map(|s| s.y[0]).sum::<f64>() / n;
    let fbar = pos.iter().map(|s| setup.bayes(0, &s.x)).sum::<f64>() / n;
    assert!((ybar - fbar).abs() < 3.0 / n.sqrt());
}

#[test]
fn logistic_easy_mixture() {
    let setup = LogisticEasySetup::default();
    let data = setup.generate(&[1, 1], &[40_000, 1], 3).unwrap();
    let xs = &data.tasks[0].unlabeled;
    let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
    let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / xs.len() as f64;
    assert!((m0 + 0.5).abs() < 0.03 && m1.abs() < 0.03, "mean ({m0}, {m1})");
    assert_eq!(setup.bayes(0, &[0.0, 0.0]), sigmoid(0.5));
    assert_eq!(setup.bayes(0, &[0.5, 0.0]), 0.5);
}

#[test]
fn coin_generator() {
    let d = gen_coin(10_000, 1, [0.3, 1.0], 0).unwrap();
    let mean = d.tasks[0].labeled.iter().map(|s| s.y[0]).sum::<f64>() / 10_000.0;
    assert!((mean - 0.3).abs() < 3.0 / 100.0);
    assert!(d.tasks[1].labeled.iter().all(|s| s.y[0] == 1.0));
    assert_eq!(gen_coin(1, 1, [0.5, 0.5], 0).unwrap().tasks[0].labeled.len(), 1);
    assert!(gen_coin(5, 1, [1.5, 0.5], 0).is_err());
}

#[test]
fn l2_linear_setting() {
    let setup = L2LinearSetup { d: 2, radius: 0.3, kappa: 0.5, noise: 0.1 };
    let data = setup.generate(&[10_000, 10], &[1, 1], 0).unwrap();
    let mut s = Matrix2::zeros();
    for smp in &data.tasks[0].labeled {
        s[(0, 0)] += smp.x[0] * smp.x[0];
        s[(0, 1)] += smp.x[0] * smp.x[1];
        s[(1, 1)] += smp.x[1] * smp.x[1];
    }
    s[(1, 0)] = s[(0, 1)];
    s /= 10_000.0;
    let lmin = SymmetricEigen::new(s).eigenvalues.min();
    assert!(lmin >= setup.kappa - 0.05, "{lmin}");
    let pop = setup.population(TaskLoss::Bregman(make_square_loss_on(1, -1.0, 1.0))).unwrap();
    for (p, b) in pop.tasks[0].points.iter().zip(&pop.tasks[0].bayes) {
        assert_eq!(*b, 0.3 * p[0]);
    }
    let zero = L2LinearSetup { radius: 0.0, ..setup };
    let pz = zero.population(TaskLoss::Bregman(make_square_loss_on(1, -1.0, 1.0))).unwrap();
    assert!(pz.tasks.iter().all(|t| t.bayes.iter().all(|b| *b == 0.0)));
    assert!(matches!(L2LinearSetup { d: 4, ..setup }.validate(), Err(MolError::Config(_))));
}

#[test]
fn rate_fit_recovers_exact_power_laws() {
    let ns = [32usize, 64, 128, 256, 512];
    let pts: Vec<(usize, f64)> = ns.iter().map(|&n| (n, 3.0 * (n as f64).powf(-2.0 / 3.0))).collect();
    assert!((fit_rate_points(&pts).unwrap().slope + 2.0 / 3.0).abs() < 1e-12);
    let pts: Vec<(usize, f64)> = ns.iter().map(|&n| (n, 0.5 / n as f64)).collect();
    assert!((fit_rate_points(&pts).unwrap().slope + 1.0).abs() < 1e-12);
    assert!(matches!(fit_rate_points(&pts[..3]), Err(MolError::Config(_))));
    let mut bad = pts.clone();
    bad[2].1 = 0.0;
    assert!(matches!(fit_rate_points(&bad), Err(MolError::Data(_))));
}

fn tiny(id: ExperimentId) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(id);
    cfg.seeds = 2;
    cfg.labeled = vec![cfg.labeled[0]];
    cfg.unlabeled = vec![cfg.unlabeled[0].min(256)];
    cfg.weights = WeightSpec::Grid(3);
    cfg
}

#[test]
fn every_experiment_runs_and_rows_are_sane() {
    for id in ExperimentId::ALL {
        let cfg = tiny(id);
        let out = run_experiment(&cfg).unwrap();
        let per_method = cfg.seeds * cfg.weight_vectors().unwrap().len() * cfg.size_grid().len();
        assert_eq!(out.rows.len(), per_method * cfg.methods.len(), "{id:?}");
        for r in out.rows.iter().filter(|r| r.status == "ok") {
            assert!(r.excess >= -2e-8, "{id:?} {} {}: {}", r.method, r.weights, r.excess);
            assert_eq!(r.excess_risks.len(), 2);
        }
        let ok = out.rows.iter().filter(|r| r.status == "ok").count();
        assert!(ok >= 2 * per_method, "{id:?}: only {ok} rows succeeded");
    }
}

#[test]
fn unsupported_method_fails_the_row_not_the_run() {
    let mut cfg = tiny(ExperimentId::ZeroOneRegression);
    cfg.methods = vec![Method::ErmMolH, Method::PlMol];
    let out = run_experiment(&cfg).unwrap();
    assert!(out.rows.iter().filter(|r| r.method == "erm_mol_H").all(|r| r.status.starts_with("error")));
    assert!(out.rows.iter().filter(|r| r.method == "pl_mol").all(|r| r.status == "ok"));
}

#[test]
fn empty_weight_grid_is_a_config_error() {
    let mut cfg = tiny(ExperimentId::CoinInconsistency);
    cfg.weights = WeightSpec::List(Vec::new());
    assert!(matches!(run_experiment(&cfg), Err(MolError::Config(_))));
}

#[test]
fn canonical_csv_is_independent_of_scheduling() {
    let mut cfg = tiny(ExperimentId::LipschitzRegression);
    cfg.execution = Execution::Sequential;
    let a = rows_to_csv(&run_experiment(&cfg).unwrap().rows).unwrap();
    cfg.execution = Execution::Parallel;
    cfg.workers = Some(3);
    let b = rows_to_csv(&run_experiment(&cfg).unwrap().rows).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_round_trip() {
    let cfg = tiny(ExperimentId::L2LinearRegression);
    let rows = run_experiment(&cfg).unwrap().rows;
    let text = rows_to_csv(&rows).unwrap();
    let back: Vec<ResultRow> = read_rows_csv(&text).unwrap();
    assert_eq!(rows_to_csv(&back).unwrap(), text);
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.excess.to_bits(), b.excess.to_bits());
    }
    let fit = fit_rate(&back, GroupCol::Labeled);
    assert!(matches!(fit, Err(MolError::Config(_))));
}

#[test]
fn outputs_land_in_the_directory() {
    let cfg = tiny(ExperimentId::CoinInconsistency);
    let out = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    moltk::bench::output::write_outputs(dir.path(), &cfg, &out.references, &out.rows).unwrap();
    for f in ["results.csv", "timings.csv", "meta.json", "excess.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv, rows_to_csv(&out.rows).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert!(meta.is_object());
}

#[test]
fn lipschitz_erm_excess_falls_with_n() {
    let mut cfg = ExperimentConfig::default_for(ExperimentId::LipschitzRegression);
    cfg.labeled = (5..=12).map(|e| 1 << e).collect();
    cfg.methods = vec![Method::ErmMolG];
    let rows = run_experiment(&cfg).unwrap().rows;
    let fit = fit_rate(&rows, GroupCol::Labeled).unwrap();
    let medians: Vec<f64> = fit.medians.iter().map(|m| m.1).collect();
    assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
}
