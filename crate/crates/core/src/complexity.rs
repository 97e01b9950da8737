//! Monte-Carlo Rademacher complexities and critical radii.
//!
//! ```text
//! R_n(H) = E sup_{h in H} | (1/n) sum_i sigma_i h(X_i) |
//! ```
//!
//! The inner supremum is exact: dual norms for linear balls, a two-ellipsoid
//! program for localized linear classes, coordinate-wise maximization for
//! finite product classes and a linear program over the grid polytope.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};
use crate::exec::{map_indexed, Execution};
use crate::hypclass::{Ball, Design, HypothesisClass, Link, Model};
use crate::numeric::{dot, norm2};
use crate::rng::{child_rng, StreamRng};

/// Draws one covariate.
pub type Sampler<'a> = &'a (dyn Fn(&mut StreamRng) -> Vec<f64> + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Population norm used for localization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TaskNorm {
    /// `||f||^2 = w' S w` for linear predictors with feature second moment `S`.
    SecondMoment(Vec<Vec<f64>>),
    /// `||f||^2 = sum_j p_j f(x_j)^2` on a finite domain.
    Discrete(Vec<f64>),
}

pub fn empirical_second_moment(samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = samples.first().map(|s| s.len()).ok_or_else(|| MolError::Data("no samples".into()))?;
    let mut m = vec![vec![0.0; d]; d];
    for s in samples {
        if s.len() != d {
            return Err(MolError::Shape("ragged samples".into()));
        }
        for i in 0..d {
            for j in 0..d {
                m[i][j] += s[i] * s[j];
            }
        }
    }
    let n = samples.len() as f64;
    Ok(m.into_iter().map(|r| r.into_iter().map(|v| v / n).collect()).collect())
}

fn summarize(values: &[f64]) -> RademacherEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    RademacherEstimate { mean, std_error: (var / n).sqrt(), draws: values.len() }
}

fn draw(n: usize, sampler: Sampler, rng: &mut StreamRng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| sampler(rng)).collect();
    let sig: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    (xs, sig)
}

/// Direction `c` with `(1/n) sum_i sigma_i h(X_i) = <c, params>` for classes
/// that are linear in their parameters.
fn rademacher_direction(class: &HypothesisClass, xs: &[Vec<f64>], sig: &[f64]) -> Result<Vec<f64>> {
    let design = class.design(xs)?;
    let mut c = vec![0.0; class.num_params()];
    let n = xs.len() as f64;
    let weights: Vec<f64> = sig.iter().map(|s| s / n).collect();
    class.backward(&design, &weights, &mut c);
    Ok(c)
}

fn grid_linear_max(class: &HypothesisClass, c: &[f64]) -> f64 {
    let cn = norm2(c);
    if cn == 0.0 {
        return dot(c, &class.initial_params());
    }
    let mut t = 1.0 / cn;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..80 {
        let raw: Vec<f64> = c.iter().map(|v| v * t).collect();
        let val = dot(c, &class.project(&raw));
        if val <= best + 1e-15 * best.abs().max(1e-300) && t > 1e3 / cn {
            return best.max(val);
        }
        best = best.max(val);
        t *= 2.0;
    }
    best
}

fn sup_abs(class: &HypothesisClass, xs: &[Vec<f64>], sig: &[f64]) -> Result<f64> {
    match class {
        HypothesisClass::Linear(l) => {
            if l.link != Link::Identity {
                return Err(MolError::Unsupported("Rademacher estimates need an identity link".into()));
            }
            let v = rademacher_direction(class, xs, sig)?;
            Ok(l.radius
                * match l.ball {
                    Ball::L2 => norm2(&v),
                    Ball::L1 => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
                })
        }
        HypothesisClass::Grid(_) => {
            let c = rademacher_direction(class, xs, sig)?;
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            Ok(grid_linear_max(class, &c).max(grid_linear_max(class, &neg)).max(0.0))
        }
        HypothesisClass::Finite(f) => {
            let Design::Finite { index } = class.design(xs)? else { unreachable!() };
            let mut s = vec![0.0; f.domain.len()];
            for (&j, &g) in index.iter().zip(sig) {
                s[j] += g / xs.len() as f64;
            }
            let hi: f64 = f.outputs.iter().zip(&s).map(|(o, v)| o.iter().map(|a| a * v).fold(f64::NEG_INFINITY, f64::max)).sum();
            let lo: f64 = f.outputs.iter().zip(&s).map(|(o, v)| o.iter().map(|a| a * v).fold(f64::INFINITY, f64::min)).sum();
            Ok(hi.abs().max(lo.abs()))
        }
    }
}

pub fn rademacher_estimate(
    class: &HypothesisClass,
    n: usize,
    sampler: Sampler,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<RademacherEstimate> {
    if n == 0 || draws == 0 {
        return Err(MolError::Config("need n >= 1 and at least one draw".into()));
    }
    let values: Vec<f64> = map_indexed(draws, exec, |d| {
        let mut rng = child_rng(seed, &[d as u64]);
        let (xs, sig) = draw(n, sampler, &mut rng);
        sup_abs(class, &xs, &sig)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    Ok(summarize(&values))
}

/// `max <u, v>` subject to `||u + c||_2 <= R` and `u' S u <= r^2`, with `S`
/// given by its eigen-decomposition. Nested bisection on the two multipliers.
struct TwoEllipsoid {
    q: DMatrix<f64>,
    lambda: Vec<f64>,
}

impl TwoEllipsoid {
    fn new(s: &[Vec<f64>]) -> Result<Self> {
        let d = s.len();
        if s.iter().any(|r| r.len() != d) {
            return Err(MolError::Shape("second moment must be square".into()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (s[i][j] + s[j][i]));
        let eig = SymmetricEigen::new(m);
        Ok(Self { lambda: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(), q: eig.eigenvectors })
    }

    fn rotate(&self, v: &[f64]) -> Vec<f64> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| self.q[(j, i)] * v[j]).sum()).collect()
    }

    fn maximize(&self, v: &[f64], c: &[f64], big_r: f64, r: f64) -> f64 {
        let vt = self.rotate(v);
        let ct = self.rotate(c);
        if norm2(&vt) == 0.0 {
            return 0.0;
        }
        let lam = &self.lambda;
        let u_of = |alpha: f64, beta: f64| -> Vec<f64> {
            (0..vt.len())
                .map(|i| {
                    let den = 2.0 * alpha + 2.0 * beta * lam[i];
                    if den > 0.0 {
                        (vt[i] - 2.0 * alpha * ct[i]) / den
                    } else if vt[i] - 2.0 * alpha * ct[i] == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY * (vt[i] - 2.0 * alpha * ct[i]).signum()
                    }
                })
                .collect()
        };
        let ball = |u: &[f64]| u.iter().zip(&ct).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
        let ell = |u: &[f64]| u.iter().zip(lam).map(|(a, l)| l * a * a).sum::<f64>();
        let alpha_for = |beta: f64| -> f64 {
            let u0 = u_of(0.0, beta);
            if u0.iter().all(|x| x.is_finite()) && ball(&u0) <= big_r {
                return 0.0;
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while ball(&u_of(hi, beta)) > big_r {
                hi *= 2.0;
                if hi > 1e300 {
                    break;
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ball(&u_of(mid, beta)) > big_r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let beta = {
            let a0 = alpha_for(0.0);
            if ell(&u_of(a0, 0.0)) <= r * r {
                0.0
            } else {
                let (mut lo, mut hi) = (0.0, 1.0);
                while ell(&u_of(alpha_for(hi), hi)) > r * r {
                    hi *= 2.0;
                    if hi > 1e300 {
                        break;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if ell(&u_of(alpha_for(mid), mid)) > r * r {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                hi
            }
        };
        let u = u_of(alpha_for(beta), beta);
        dot(&u, &vt)
    }
}

/// Localized complexity of `(H - center) ∩ {||f|| <= r}`.
#[allow(clippy::too_many_arguments)]
pub fn localized_rademacher(
    class: &HypothesisClass,
    center: &Model,
    r: f64,
    norm: &TaskNorm,
    n: usize,
    sampler: Sampler,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<RademacherEstimate> {
    if !(r >= 0.0) {
        return Err(MolError::Config("radius must be non-negative".into()));
    }
    if n == 0 || draws == 0 {
        return Err(MolError::Config("need n >= 1 and at least one draw".into()));
    }
    class.check_model(center, crate::data::Tolerances::default().constraint_tol)?;
    match (class, norm) {
        (HypothesisClass::Linear(l), TaskNorm::SecondMoment(s)) => {
            if l.link != Link::Identity || l.ball != Ball::L2 {
                return Err(MolError::Unsupported("localized linear classes need an l2 ball and identity link".into()));
            }
            if s.len() != l.feature_dim() {
                return Err(MolError::Shape("second moment dimension differs from the feature dimension".into()));
            }
            let prog = TwoEllipsoid::new(s)?;
            let values: Vec<f64> = map_indexed(draws, exec, |d| {
                let mut rng = child_rng(seed, &[d as u64]);
                let (xs, sig) = draw(n, sampler, &mut rng);
                let v = rademacher_direction(class, &xs, &sig)?;
                let neg: Vec<f64> = v.iter().map(|x| -x).collect();
                let a = prog.maximize(&v, &center.params, l.radius, r);
                let b = prog.maximize(&neg, &center.params, l.radius, r);
                Ok(a.max(b).max(0.0))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            Ok(summarize(&values))
        }
        (HypothesisClass::Finite(f), TaskNorm::Discrete(p)) => {
            if p.len() != f.domain.len() {
                return Err(MolError::Shape("one mass per domain point".into()));
            }
            if f.cardinality() > crate::solve::ENUMERATION_BUDGET {
                return Err(MolError::Budget("finite class too large to localize".into()));
            }
            let mut members = Vec::new();
            f.for_each_member(|m| {
                let diff: Vec<f64> = m.iter().zip(&center.params).map(|(a, b)| a - b).collect();
                if diff.iter().zip(p).map(|(x, w)| w * x * x).sum::<f64>() <= r * r * (1.0 + 1e-12) {
                    members.push(diff);
                }
            });
            let values: Vec<f64> = map_indexed(draws, exec, |d| {
                let mut rng = child_rng(seed, &[d as u64]);
                let (xs, sig) = draw(n, sampler, &mut rng);
                let Design::Finite { index } = class.design(&xs)? else { unreachable!() };
                let mut s = vec![0.0; f.domain.len()];
                for (&j, &g) in index.iter().zip(&sig) {
                    s[j] += g / n as f64;
                }
                Ok(members.iter().map(|m| dot(m, &s).abs()).fold(0.0, f64::max))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            Ok(summarize(&values))
        }
        _ => Err(MolError::Unsupported("localization for this class and norm".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalRadius {
    pub r_star: f64,
    /// Evaluated radii with their estimates, sorted by radius.
    pub evaluations: Vec<(f64, RademacherEstimate)>,
}

impl CriticalRadius {
    pub fn r_star_sq(&self) -> f64 {
        self.r_star * self.r_star
    }
}

/// Checks that `R(r)/r` is non-increasing within three standard errors.
pub fn check_ratio_monotone(evals: &[(f64, RademacherEstimate)]) -> Result<()> {
    let mut sorted: Vec<_> = evals.iter().filter(|(r, _)| *r > 0.0).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        let (ra, ea) = w[0];
        let (rb, eb) = w[1];
        let slack = 3.0 * ((ea.std_error / ra).powi(2) + (eb.std_error / rb).powi(2)).sqrt();
        if eb.mean / rb > ea.mean / ra + slack + 1e-12 * (ea.mean / ra).abs() {
            return Err(MolError::Monotonicity(format!("R(r)/r rises from {} at r={ra} to {} at r={rb}", ea.mean / ra, eb.mean / rb)));
        }
    }
    Ok(())
}

/// Smallest positive `r` with `R(r) <= r^2`, by bisection on `R(r)/r - r`.
/// `local` must use common random numbers across radii.
pub fn critical_radius_with(local: &dyn Fn(f64) -> Result<RademacherEstimate>, r_max: f64) -> Result<CriticalRadius> {
    if !(r_max > 0.0) {
        return Err(MolError::Config("radius bound must be positive".into()));
    }
    let mut evals = Vec::new();
    let psi = |r: f64, evals: &mut Vec<(f64, RademacherEstimate)>| -> Result<f64> {
        let e = local(r)?;
        evals.push((r, e));
        Ok(e.mean / r - r)
    };
    let mut lo = r_max * 1e-6;
    let psi_lo = psi(lo, &mut evals)?;
    if psi_lo <= 0.0 {
        if evals[0].1.mean == 0.0 {
            return Ok(CriticalRadius { r_star: 0.0, evaluations: evals });
        }
        lo *= 1e-6;
        if psi(lo, &mut evals)? <= 0.0 {
            return Err(MolError::Bracket(format!("R(r)/r <= r already at r = {lo}")));
        }
    }
    let mut hi = r_max;
    let mut expansions = 0;
    while psi(hi, &mut evals)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(MolError::Bracket("no sign change of R(r)/r - r".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if psi(mid, &mut evals)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    evals.sort_by(|a, b| a.0.total_cmp(&b.0));
    check_ratio_monotone(&evals)?;
    Ok(CriticalRadius { r_star: hi, evaluations: evals })
}

/// Critical radius of a localized class around `center` with common random numbers.
#[allow(clippy::too_many_arguments)]
pub fn critical_radius(
    class: &HypothesisClass,
    center: &Model,
    norm: &TaskNorm,
    n: usize,
    sampler: Sampler,
    draws: usize,
    seed: u64,
    r_max: f64,
    exec: Execution,
) -> Result<CriticalRadius> {
    let local = |r: f64| localized_rademacher(class, center, r, norm, n, sampler, draws, seed, exec);
    critical_radius_with(&local, r_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ellipsoid_reduces_to_ball() {
        let p = TwoEllipsoid::new(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = p.maximize(&[3.0, 4.0], &[0.0, 0.0], 1.0, 10.0);
        assert!((v - 5.0).abs() < 1e-9);
        let v = p.maximize(&[3.0, 4.0], &[0.0, 0.0], 10.0, 0.5);
        assert!((v - 2.5).abs() < 1e-9);
    }

    #[test]
    fn two_ellipsoid_anisotropic() {
        // max u1 s.t. 4 u1^2 + u2^2 <= 1 gives 1/2.
        let p = TwoEllipsoid::new(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = p.maximize(&[1.0, 0.0], &[0.0, 0.0], 10.0, 1.0);
        assert!((v - 0.5).abs() < 1e-9);
    }
}
