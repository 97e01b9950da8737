//! Piecewise-linear functions on a uniform grid of `[0, 1]` with a box on the
//! values and an optional Lipschitz bound.

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLipschitzClass {
    pub grid_size: usize,
    /// `None` leaves the slopes unconstrained.
    pub lipschitz: Option<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl GridLipschitzClass {
    pub fn new(grid_size: usize, lipschitz: Option<f64>) -> Self {
        Self::with_range(grid_size, lipschitz, 0.0, 1.0)
    }

    pub fn with_range(grid_size: usize, lipschitz: Option<f64>, lo: f64, hi: f64) -> Self {
        assert!(grid_size >= 2, "grid needs at least two nodes");
        assert!(lo < hi);
        if let Some(l) = lipschitz {
            assert!(l >= 0.0 && l.is_finite(), "Lipschitz constant must be finite and non-negative");
        }
        Self { grid_size, lipschitz, lo, hi }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_size - 1) as f64
    }

    /// Largest allowed difference between neighbouring nodes.
    pub fn step_bound(&self) -> Option<f64> {
        self.lipschitz.map(|l| l * self.spacing())
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Cell index and interpolation weight of `x`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !(-1e-12..=1.0 + 1e-12).contains(&x) {
            return Err(MolError::Domain(format!("grid functions live on [0, 1], got {x}")));
        }
        let s = x.clamp(0.0, 1.0) * (self.grid_size - 1) as f64;
        let cell = (s.floor() as usize).min(self.grid_size - 2);
        Ok((cell, s - cell as f64))
    }

    pub fn interpolate(values: &[f64], cell: usize, theta: f64) -> f64 {
        (1.0 - theta) * values[cell] + theta * values[cell + 1]
    }

    pub fn project(&self, raw: &[f64]) -> Vec<f64> {
        match self.step_bound() {
            None => raw.iter().map(|v| v.clamp(self.lo, self.hi)).collect(),
            Some(c) => project_bounded_steps(raw, c, self.lo, self.hi),
        }
    }

    pub fn contains(&self, params: &[f64], tol: f64) -> bool {
        if params.len() != self.grid_size || params.iter().any(|v| !v.is_finite()) {
            return false;
        }
        if params.iter().any(|&v| v < self.lo - tol || v > self.hi + tol) {
            return false;
        }
        match self.step_bound() {
            None => true,
            Some(c) => params.windows(2).all(|w| (w[1] - w[0]).abs() <= c + tol),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Knot {
    x: f64,
    d: f64,
}

fn eval_right(knots: &[Knot], t: f64) -> f64 {
    let j = knots.partition_point(|k| k.x <= t);
    if j == 0 {
        return knots[0].d;
    }
    if j == knots.len() {
        return knots[j - 1].d;
    }
    let (a, b) = (knots[j - 1], knots[j]);
    if a.x == t {
        return a.d;
    }
    a.d + (t - a.x) * (b.d - a.d) / (b.x - a.x)
}

fn eval_left(knots: &[Knot], t: f64) -> f64 {
    let j = knots.partition_point(|k| k.x < t);
    if j == 0 {
        return knots[0].d;
    }
    if j == knots.len() {
        return knots[j - 1].d;
    }
    let (a, b) = (knots[j - 1], knots[j]);
    if b.x == t {
        return b.d;
    }
    a.d + (t - a.x) * (b.d - a.d) / (b.x - a.x)
}

/// Minimizer of a convex function given by its non-decreasing derivative,
/// together with the left and right derivative limits there.
fn argmin(knots: &[Knot]) -> (f64, f64, f64) {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if first.d >= 0.0 {
        return (first.x, first.d, first.d);
    }
    if last.d <= 0.0 {
        return (last.x, last.d, last.d);
    }
    let j = knots.partition_point(|k| k.d < 0.0);
    let (a, b) = (knots[j - 1], knots[j]);
    if a.x == b.x {
        return (a.x, a.d, b.d);
    }
    let u = a.x - a.d * (b.x - a.x) / (b.d - a.d);
    (u.clamp(a.x, b.x), 0.0, 0.0)
}

fn push_dedup(out: &mut Vec<Knot>, k: Knot) {
    if let Some(p) = out.last() {
        if p.x == k.x && p.d == k.d {
            return;
        }
    }
    out.push(k);
}

/// Euclidean projection onto `{lo <= v_i <= hi, |v_{i+1} - v_i| <= c}`.
///
/// Forward pass over the chain keeps the derivative of the partial objective
/// as a piecewise-linear function; backward pass clamps each minimizer to the
/// window allowed by its successor.
pub fn project_bounded_steps(z: &[f64], c: f64, lo: f64, hi: f64) -> Vec<f64> {
    let m = z.len();
    if m == 0 {
        return Vec::new();
    }
    let mut knots = vec![Knot { x: lo, d: lo - z[0] }, Knot { x: hi, d: hi - z[0] }];
    let mut minimizers = Vec::with_capacity(m);
    let mut next = Vec::with_capacity(2 * m + 8);
    for zi in &z[1..] {
        let (u, dl, dr) = argmin(&knots);
        minimizers.push(u);
        next.clear();
        for k in knots.iter().take_while(|k| k.x < u) {
            push_dedup(&mut next, Knot { x: k.x - c, d: k.d });
        }
        push_dedup(&mut next, Knot { x: u - c, d: dl.min(0.0) });
        push_dedup(&mut next, Knot { x: u - c, d: 0.0 });
        push_dedup(&mut next, Knot { x: u + c, d: 0.0 });
        push_dedup(&mut next, Knot { x: u + c, d: dr.max(0.0) });
        for k in knots.iter().filter(|k| k.x > u) {
            push_dedup(&mut next, Knot { x: k.x + c, d: k.d });
        }
        let at_lo = eval_right(&next, lo);
        let at_hi = eval_left(&next, hi);
        knots.clear();
        knots.push(Knot { x: lo, d: at_lo + lo - zi });
        for k in next.iter().filter(|k| k.x > lo && k.x < hi) {
            push_dedup(&mut knots, Knot { x: k.x, d: k.d + k.x - zi });
        }
        push_dedup(&mut knots, Knot { x: hi, d: at_hi + hi - zi });
    }
    let (last, _, _) = argmin(&knots);
    let mut v = vec![0.0; m];
    v[m - 1] = last;
    for i in (0..m - 1).rev() {
        v[i] = minimizers[i].clamp(v[i + 1] - c, v[i + 1] + c).clamp(lo, hi);
    }
    v
}
