#![allow(dead_code)]

use std::sync::Arc;

use moltk::hypclass::{Ball, FeatureMap, GridLipschitzClass, LinearClass, Link};
use moltk::losses::{make_binary_entropy_loss, make_square_loss};
use moltk::oracle::{PopulationSpec, PopulationTask};
use moltk::rng::rng_from_seed;
use moltk::solve::{Objective, TargetSource, Term};
use moltk::{HypothesisClass, Scalarization, TaskLoss};
use rand::Rng;

/// Two tasks on at most 8 shared points with random label distributions.
pub fn random_spec(seed: u64, loss: TaskLoss) -> PopulationSpec {
    let mut rng = rng_from_seed(seed);
    let m = rng.random_range(1..=8);
    let points: Vec<Vec<f64>> = (0..m).map(|j| vec![j as f64]).collect();
    let tasks = (0..2)
        .map(|_| {
            let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.01).collect();
            let z: f64 = raw.iter().sum();
            let labels = (0..m)
                .map(|_| {
                    let k = rng.random_range(1..=3);
                    let ps: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.01).collect();
                    let zp: f64 = ps.iter().sum();
                    ps.iter().map(|p| (rng.random::<f64>(), p / zp)).collect()
                })
                .collect();
            PopulationTask::with_labels(points.clone(), raw.iter().map(|v| v / z).collect(), labels, loss).unwrap()
        })
        .collect();
    PopulationSpec::new(tasks).unwrap()
}

pub fn term(class: &HypothesisClass, loss: TaskLoss, xs: &[Vec<f64>], ys: Vec<f64>) -> Term {
    Term::new(loss, Arc::new(class.design(xs).unwrap()), Arc::new(ys), TargetSource::Labels)
}

pub fn random_objective(seed: u64) -> (Objective, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let kind = rng.random_range(0..4);
    // the entropy potential needs predictions inside (0, 1)
    let entropy = kind != 0 && rng.random::<bool>();
    let loss = TaskLoss::Bregman(if entropy { make_binary_entropy_loss(None) } else { make_square_loss(1) });
    let class = match kind {
        0 => HypothesisClass::Linear(LinearClass::new(3, FeatureMap::Identity, Ball::L2, 5.0, Link::Identity)),
        1 => HypothesisClass::Linear(LinearClass::new(2, FeatureMap::Polynomial { degree: 3 }, Ball::L1, 5.0, Link::Sigmoid { eps: 1e-6 })),
        2 => HypothesisClass::Linear(LinearClass::new(2, FeatureMap::Polynomial { degree: 2 }, Ball::L2, 5.0, Link::Sigmoid { eps: 1e-6 })),
        _ => HypothesisClass::Grid(GridLipschitzClass::new(9, Some(2.0))),
    };
    let dim = if kind == 3 {
        1
    } else if kind == 0 {
        3
    } else {
        2
    };
    let tasks = rng.random_range(1..4);
    let mut terms = Vec::new();
    for _ in 0..tasks {
        let n = rng.random_range(3..20);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        terms.push(term(&class, loss, &xs, ys));
    }
    let raw: Vec<f64> = (0..tasks).map(|_| rng.random::<f64>() + 0.05).collect();
    let s = Scalarization::new(moltk::ScalarizationKind::Linear, moltk::WeightVector::normalized(raw).unwrap());
    let mut p = class.random_params(&mut rng);
    if kind != 3 {
        // keep sigmoid scores moderate so the clip stays inactive
        p.iter_mut().for_each(|v| *v *= 0.3);
    } else {
        p.iter_mut().for_each(|v| *v = 0.1 + 0.8 * *v);
    }
    (Objective::new(class, terms, s).unwrap(), p)
}
