//! Synthetic multi-task data and the matching population supports.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_hermite, square_midpoints};
use crate::data::{MultiTaskData, Sample, TaskData};
use crate::error::{MolError, Result};
use crate::losses::TaskLoss;
use crate::numeric::sigmoid;
use crate::oracle::{PopulationSpec, PopulationTask};
use crate::rng::{child_rng, StreamRng};

fn bernoulli(rng: &mut StreamRng, p: f64) -> f64 {
    (rng.random::<f64>() < p) as u8 as f64
}

fn check_sizes(n: &[usize], big_n: &[usize], k: usize) -> Result<()> {
    if n.len() != k || big_n.len() != k {
        return Err(MolError::Config(format!("sample sizes must list {k} tasks")));
    }
    if n.contains(&0) {
        return Err(MolError::Config("labeled sample sizes must be positive".into()));
    }
    Ok(())
}

/// Single-point domain `{0}` with `Y ~ Ber(p_k)`; `N` unlabeled copies of the point.
pub fn gen_coin(n: usize, big_n: usize, p: [f64; 2], seed: u64) -> Result<MultiTaskData> {
    if n == 0 {
        return Err(MolError::Config("n must be positive".into()));
    }
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(MolError::Config("coin biases must lie in [0, 1]".into()));
    }
    let tasks = (0..2)
        .map(|k| {
            let mut rng = child_rng(seed, &[k as u64]);
            let labeled = (0..n).map(|_| Sample::new(vec![0.0], vec![bernoulli(&mut rng, p[k])])).collect();
            TaskData::new(k, labeled, vec![vec![0.0]; big_n])
        })
        .collect::<Result<_>>()?;
    MultiTaskData::new(tasks)
}

pub fn coin_population(p: [f64; 2]) -> Result<PopulationSpec> {
    let tasks = p
        .iter()
        .map(|&q| PopulationTask::with_labels(vec![vec![0.0]], vec![1.0], vec![vec![(0.0, 1.0 - q), (1.0, q)]], TaskLoss::ZeroOne))
        .collect::<Result<_>>()?;
    PopulationSpec::new(tasks)
}

/// Mean of `clip(m + U, 0, 1)` for `U ~ Uniform[-w, w]`.
pub fn clipped_uniform_mean(m: f64, w: f64) -> f64 {
    if w == 0.0 {
        return m.clamp(0.0, 1.0);
    }
    // integrate clip(t) for t in [m - w, m + w]
    let prim = |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else if t <= 1.0 {
            0.5 * t * t
        } else {
            0.5 + (t - 1.0)
        }
    };
    (prim(m + w) - prim(m - w)) / (2.0 * w)
}

/// One-dimensional regression tasks on `[0, 1]` with densities
/// `p_1 = amp sin(freq x) + 1`, `p_2 = 2 - p_1` (normalized), constant Bayes
/// functions `a` and `b`, and uniform label noise of half-width `noise`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LipschitzSetup {
    pub a: f64,
    pub b: f64,
    pub amp: f64,
    pub freq: f64,
    pub noise: f64,
}

impl Default for LipschitzSetup {
    fn default() -> Self {
        Self { a: 0.465, b: 0.535, amp: 0.7, freq: 20.0, noise: 0.1 }
    }
}

impl LipschitzSetup {
    pub fn raw_density(&self, k: usize, x: f64) -> f64 {
        let p1 = self.amp * (self.freq * x).sin() + 1.0;
        if k == 0 {
            p1
        } else {
            2.0 - p1
        }
    }

    pub fn mean(&self, k: usize) -> f64 {
        if k == 0 {
            self.a
        } else {
            self.b
        }
    }

    fn sample_x(&self, k: usize, rng: &mut StreamRng) -> f64 {
        let cap = 1.0 + self.amp.abs();
        loop {
            let x: f64 = rng.random();
            if rng.random::<f64>() * cap <= self.raw_density(k, x) {
                return x;
            }
        }
    }

    pub fn generate(&self, n: &[usize], big_n: &[usize], seed: u64) -> Result<MultiTaskData> {
        check_sizes(n, big_n, 2)?;
        if self.amp.abs() > 1.0 {
            return Err(MolError::Config("densities must stay non-negative".into()));
        }
        let tasks = (0..2)
            .map(|k| {
                let mut rng = child_rng(seed, &[k as u64]);
                let labeled = (0..n[k])
                    .map(|_| {
                        let x = self.sample_x(k, &mut rng);
                        let e: f64 = rng.random_range(-self.noise..=self.noise);
                        Sample::new(vec![x], vec![(self.mean(k) + e).clamp(0.0, 1.0)])
                    })
                    .collect();
                let unlabeled = (0..big_n[k]).map(|_| vec![self.sample_x(k, &mut rng)]).collect();
                TaskData::new(k, labeled, unlabeled)
            })
            .collect::<Result<_>>()?;
        MultiTaskData::new(tasks)
    }

    pub fn population(&self, points: usize, loss: TaskLoss) -> Result<PopulationSpec> {
        let d0 = |x: f64| self.raw_density(0, x);
        let d1 = |x: f64| self.raw_density(1, x);
        let m0 = clipped_uniform_mean(self.a, self.noise);
        let m1 = clipped_uniform_mean(self.b, self.noise);
        let f0 = move |_: f64| m0;
        let f1 = move |_: f64| m1;
        PopulationSpec::grid_1d(points, &[&d0, &d1], &[&f0, &f1], &[loss, loss])
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: &[f64]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        vec![rng.random_range(self.x0..=self.x1), rng.random_range(self.y0..=self.y1)]
    }
}

/// Two planar classification tasks with nested rectangular supports and
/// logistic Bayes models `sigmoid(w_k . (1, x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticHardSetup {
    pub supports: [Rect; 2],
    pub weights: [[f64; 3]; 2],
    /// Label-1 probability in the positive region of task 2 for the zero-one variant.
    pub flip_positive: f64,
    /// Midpoint cells per axis of the population grid over `[-1, 1]^2`.
    pub quadrature_cells: usize,
}

impl Default for LogisticHardSetup {
    fn default() -> Self {
        Self {
            supports: [Rect { x0: -1.0, x1: 1.0, y0: -1.0, y1: 1.0 }, Rect { x0: -1.0, x1: 0.25, y0: -1.0, y1: 0.25 }],
            weights: [[0.0, 4.0, 4.0], [-2.0, -4.0, -4.0]],
            flip_positive: 0.65,
            quadrature_cells: 40,
        }
    }
}

impl LogisticHardSetup {
    pub fn bayes(&self, k: usize, x: &[f64]) -> f64 {
        let w = self.weights[k];
        sigmoid(w[0] + w[1] * x[0] + w[2] * x[1])
    }

    /// `P(Y = 1 | x)` under the chosen label model.
    pub fn label_prob(&self, k: usize, x: &[f64], zero_one: bool) -> f64 {
        let f = self.bayes(k, x);
        if !zero_one {
            return f;
        }
        match (k, f >= 0.5) {
            (0, pos) => pos as u8 as f64,
            (_, true) => self.flip_positive,
            (_, false) => 0.0,
        }
    }

    pub fn generate(&self, n: &[usize], big_n: &[usize], zero_one: bool, seed: u64) -> Result<MultiTaskData> {
        check_sizes(n, big_n, 2)?;
        let tasks = (0..2)
            .map(|k| {
                let mut rng = child_rng(seed, &[k as u64]);
                let rect = self.supports[k];
                let labeled = (0..n[k])
                    .map(|_| {
                        let x = rect.sample(&mut rng);
                        let y = bernoulli(&mut rng, self.label_prob(k, &x, zero_one));
                        Sample::new(x, vec![y])
                    })
                    .collect();
                let unlabeled = (0..big_n[k]).map(|_| rect.sample(&mut rng)).collect();
                TaskData::new(k, labeled, unlabeled)
            })
            .collect::<Result<_>>()?;
        MultiTaskData::new(tasks)
    }

    /// Population on a shared midpoint grid; each task puts uniform mass on
    /// the cells inside its support.
    pub fn population(&self, loss: TaskLoss, zero_one: bool) -> Result<PopulationSpec> {
        let pts = square_midpoints(-1.0, 1.0, self.quadrature_cells);
        let tasks = (0..2)
            .map(|k| {
                let inside: Vec<f64> = pts.iter().map(|p| self.supports[k].contains(p) as u8 as f64).collect();
                let total: f64 = inside.iter().sum();
                if total == 0.0 {
                    return Err(MolError::Config("support misses the quadrature grid".into()));
                }
                let weights = inside.iter().map(|v| v / total).collect();
                let bayes = pts.iter().map(|p| self.label_prob(k, p, zero_one)).collect();
                PopulationTask::new(pts.clone(), weights, bayes, loss)
            })
            .collect::<Result<_>>()?;
        PopulationSpec::new(tasks)
    }
}

/// Two planar tasks with Gaussian-mixture covariates
/// `X^1 ~ N(0, I)/2 + N(-e1, I)/2`, `X^2 ~ N(0, I)/2 + N(e1, I)/2` and
/// Bayes models `sigmoid(-x1 + 1/2)`, `sigmoid(x1 + 1/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticEasySetup {
    pub shift: f64,
    pub bias: f64,
    pub hermite_nodes: usize,
}

impl Default for LogisticEasySetup {
    fn default() -> Self {
        Self { shift: 1.0, bias: 0.5, hermite_nodes: 16 }
    }
}

impl LogisticEasySetup {
    fn centers(&self, k: usize) -> [[f64; 2]; 2] {
        let s = if k == 0 { -self.shift } else { self.shift };
        [[0.0, 0.0], [s, 0.0]]
    }

    pub fn bayes(&self, k: usize, x: &[f64]) -> f64 {
        let sign = if k == 0 { -1.0 } else { 1.0 };
        sigmoid(sign * x[0] + self.bias)
    }

    pub fn generate(&self, n: &[usize], big_n: &[usize], seed: u64) -> Result<MultiTaskData> {
        check_sizes(n, big_n, 2)?;
        let tasks = (0..2)
            .map(|k| {
                let mut rng = child_rng(seed, &[k as u64]);
                let c = self.centers(k);
                let draw = |rng: &mut StreamRng| -> Vec<f64> {
                    let m = c[rng.random_range(0..2)];
                    vec![m[0] + rng.sample::<f64, _>(StandardNormal), m[1] + rng.sample::<f64, _>(StandardNormal)]
                };
                let labeled = (0..n[k])
                    .map(|_| {
                        let x = draw(&mut rng);
                        let y = bernoulli(&mut rng, self.bayes(k, &x));
                        Sample::new(x, vec![y])
                    })
                    .collect();
                let unlabeled = (0..big_n[k]).map(|_| draw(&mut rng)).collect();
                TaskData::new(k, labeled, unlabeled)
            })
            .collect::<Result<_>>()?;
        MultiTaskData::new(tasks)
    }

    /// Tensor Gauss-Hermite rule around each mixture component.
    pub fn population(&self, loss: TaskLoss) -> Result<PopulationSpec> {
        let (z, w) = gauss_hermite(self.hermite_nodes);
        let tasks = (0..2)
            .map(|k| {
                let mut pts = Vec::new();
                let mut ws = Vec::new();
                for c in self.centers(k) {
                    for (zi, wi) in z.iter().zip(&w) {
                        for (zj, wj) in z.iter().zip(&w) {
                            pts.push(vec![c[0] + zi, c[1] + zj]);
                            ws.push(0.5 * wi * wj);
                        }
                    }
                }
                let s: f64 = ws.iter().sum();
                let ws: Vec<f64> = ws.iter().map(|v| v / s).collect();
                let bayes = pts.iter().map(|p| self.bayes(k, p)).collect();
                PopulationTask::new(pts, ws, bayes, loss)
            })
            .collect::<Result<_>>()?;
        PopulationSpec::new(tasks)
    }
}

/// Linear regression with covariates uniform on the unit sphere of `R^d`
/// (second moment `I/d`), targets `<w*_k, x>` plus uniform noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L2LinearSetup {
    pub d: usize,
    pub radius: f64,
    pub kappa: f64,
    pub noise: f64,
}

impl Default for L2LinearSetup {
    fn default() -> Self {
        Self { d: 2, radius: 0.25, kappa: 0.5, noise: 0.1 }
    }
}

impl L2LinearSetup {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(MolError::Config("need d >= 2".into()));
        }
        let floor = 1.0 / self.d as f64;
        if self.kappa > floor + 1e-12 {
            return Err(MolError::Config(format!(
                "eigenvalue floor {} exceeds 1/d = {floor}, impossible for covariates in the unit ball",
                self.kappa
            )));
        }
        if !(self.radius >= 0.0 && self.radius <= self.kappa) {
            return Err(MolError::Config("need 0 <= R <= kappa".into()));
        }
        Ok(())
    }

    pub fn truth(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.d];
        w[k % self.d] = self.radius;
        w
    }

    pub fn sample_x(&self, rng: &mut StreamRng) -> Vec<f64> {
        sphere(self.d, rng)
    }

    pub fn generate(&self, n: &[usize], big_n: &[usize], seed: u64) -> Result<MultiTaskData> {
        self.validate()?;
        check_sizes(n, big_n, 2)?;
        let tasks = (0..2)
            .map(|k| {
                let mut rng = child_rng(seed, &[k as u64]);
                let w = self.truth(k);
                let labeled = (0..n[k])
                    .map(|_| {
                        let x = self.sample_x(&mut rng);
                        let e: f64 = rng.random_range(-self.noise..=self.noise);
                        let y = (crate::numeric::dot(&w, &x) + e).clamp(-1.0, 1.0);
                        Sample::new(x, vec![y])
                    })
                    .collect();
                let unlabeled = (0..big_n[k]).map(|_| self.sample_x(&mut rng)).collect();
                TaskData::new(k, labeled, unlabeled)
            })
            .collect::<Result<_>>()?;
        MultiTaskData::new(tasks)
    }

    /// Points `+-e_i` with mass `1/(2d)` reproduce the second moment `I/d`,
    /// which is all a squared-loss excess of a linear predictor depends on.
    pub fn population(&self, loss: TaskLoss) -> Result<PopulationSpec> {
        self.validate()?;
        let mut pts = Vec::new();
        for i in 0..self.d {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; self.d];
                p[i] = s;
                pts.push(p);
            }
        }
        let m = pts.len() as f64;
        let tasks = (0..2)
            .map(|k| {
                let w = self.truth(k);
                let bayes = pts.iter().map(|p| crate::numeric::dot(&w, p)).collect();
                PopulationTask::new(pts.clone(), vec![1.0 / m; pts.len()], bayes, loss)
            })
            .collect::<Result<_>>()?;
        PopulationSpec::new(tasks)
    }
}

pub fn sphere(d: usize, rng: &mut StreamRng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::numeric::norm2(&g);
        if n > 1e-12 {
            return g.iter().map(|v| v / n).collect();
        }
    }
}

/// Binary classification on `M` points of `[0, 1]` with linear class
/// probabilities; task 2 puts more mass on the right end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiniteBinarySetup {
    pub points: usize,
}

impl Default for FiniteBinarySetup {
    fn default() -> Self {
        Self { points: 8 }
    }
}

impl FiniteBinarySetup {
    pub fn domain(&self) -> Vec<Vec<f64>> {
        (0..self.points).map(|j| vec![j as f64 / (self.points - 1) as f64]).collect()
    }

    pub fn mass(&self, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.points).map(|j| if k == 0 { 1.0 } else { (j + 1) as f64 }).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|v| v / s).collect()
    }

    pub fn theta(&self, k: usize, x: f64) -> f64 {
        if k == 0 {
            0.85 - 0.7 * x
        } else {
            0.1 + 0.6 * x
        }
    }

    pub fn generate(&self, n: &[usize], big_n: &[usize], seed: u64) -> Result<MultiTaskData> {
        check_sizes(n, big_n, 2)?;
        if self.points < 2 {
            return Err(MolError::Config("need at least two points".into()));
        }
        let dom = self.domain();
        let tasks = (0..2)
            .map(|k| {
                let mut rng = child_rng(seed, &[k as u64]);
                let mass = self.mass(k);
                let pick = |rng: &mut StreamRng| -> usize {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    for (j, m) in mass.iter().enumerate() {
                        acc += m;
                        if u < acc {
                            return j;
                        }
                    }
                    mass.len() - 1
                };
                let labeled = (0..n[k])
                    .map(|_| {
                        let j = pick(&mut rng);
                        let y = bernoulli(&mut rng, self.theta(k, dom[j][0]));
                        Sample::new(dom[j].clone(), vec![y])
                    })
                    .collect();
                let unlabeled = (0..big_n[k]).map(|_| dom[pick(&mut rng)].clone()).collect();
                TaskData::new(k, labeled, unlabeled)
            })
            .collect::<Result<_>>()?;
        MultiTaskData::new(tasks)
    }

    pub fn population(&self) -> Result<PopulationSpec> {
        let dom = self.domain();
        let tasks = (0..2)
            .map(|k| {
                let labels = dom.iter().map(|x| {
                    let t = self.theta(k, x[0]);
                    vec![(0.0, 1.0 - t), (1.0, t)]
                });
                PopulationTask::with_labels(dom.clone(), self.mass(k), labels.collect(), TaskLoss::ZeroOne)
            })
            .collect::<Result<_>>()?;
        PopulationSpec::new(tasks)
    }
}
