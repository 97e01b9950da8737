//! Bregman losses and the zero-one loss.
//!
//! A Bregman loss is generated by a strictly convex potential `phi`:
//!
//! ```text
//! l(y, yhat) = phi(y) - phi(yhat) - <grad phi(yhat), y - yhat>
//! ```
//!
//! The first argument may sit on the boundary of the label domain, the second
//! must be interior where `grad phi` blows up. Regularity constants
//! (strong convexity `mu`, smoothness `nu`, Lipschitz `L`, bound `B`) refer to
//! the clipped regular domain controlled by `eps`.

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};
use crate::numeric::{sigmoid, xlogx, xlogxy};

const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "potential", rename_all = "snake_case")]
pub enum Potential {
    /// `phi(y) = ||y||^2` on the box `[lo, hi]^q`.
    Square { lo: f64, hi: f64 },
    /// `phi(y) = y ln y + (1 - y) ln(1 - y)` on `[0, 1]`.
    BinaryEntropy,
    /// `phi(y) = sum_j y_j ln y_j` on the probability simplex.
    SimplexKl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BregmanLoss {
    pub potential: Potential,
    pub q: usize,
    pub eps: f64,
}

pub fn default_entropy_eps() -> f64 {
    sigmoid(-1.0)
}

pub fn make_square_loss(q: usize) -> BregmanLoss {
    make_square_loss_on(q, 0.0, 1.0)
}

pub fn make_square_loss_on(q: usize, lo: f64, hi: f64) -> BregmanLoss {
    assert!(q >= 1 && lo < hi, "square loss needs q >= 1 and lo < hi");
    BregmanLoss { potential: Potential::Square { lo, hi }, q, eps: 0.0 }
}

/// Binary entropy loss; `eps` defaults to `sigmoid(-1)`.
pub fn make_binary_entropy_loss(eps: Option<f64>) -> BregmanLoss {
    let eps = eps.unwrap_or_else(default_entropy_eps);
    assert!(eps > 0.0 && eps < 0.5, "eps must lie in (0, 1/2)");
    BregmanLoss { potential: Potential::BinaryEntropy, q: 1, eps }
}

/// KL divergence on the simplex in `R^q`; `eps` defaults to `sigmoid(-1) / (q - 1)`.
pub fn make_kl_loss(q: usize, eps: Option<f64>) -> BregmanLoss {
    assert!(q >= 2, "simplex loss needs q >= 2");
    let eps = eps.unwrap_or_else(|| default_entropy_eps() / (q - 1) as f64);
    assert!(eps > 0.0 && eps * q as f64 <= 1.0, "eps must satisfy 0 < q eps <= 1");
    BregmanLoss { potential: Potential::SimplexKl, q, eps }
}

impl BregmanLoss {
    /// Diameter of the regular domain in the Euclidean norm.
    pub fn diameter(&self) -> f64 {
        match self.potential {
            Potential::Square { lo, hi } => (hi - lo) * (self.q as f64).sqrt(),
            Potential::BinaryEntropy => 1.0,
            Potential::SimplexKl => std::f64::consts::SQRT_2,
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self.potential {
            Potential::Square { .. } => 2.0,
            Potential::BinaryEntropy => 4.0,
            Potential::SimplexKl => 1.0,
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self.potential {
            Potential::Square { .. } => 2.0,
            Potential::BinaryEntropy => 1.0 / (self.eps * (1.0 - self.eps)),
            Potential::SimplexKl => 1.0 / self.eps,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self.potential {
            Potential::Square { .. } => 2.0 * self.diameter(),
            _ => 1.5 * self.smoothness() * self.diameter(),
        }
    }

    pub fn bound(&self) -> f64 {
        match self.potential {
            Potential::Square { .. } => self.diameter().powi(2),
            _ => -self.eps.ln(),
        }
    }

    fn check_label(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.q {
            return Err(MolError::Shape(format!("label has length {}, loss expects {}", y.len(), self.q)));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MolError::Domain("non-finite label".into()));
        }
        match self.potential {
            Potential::Square { lo, hi } => {
                let slack = DOMAIN_SLACK * (hi - lo).max(1.0);
                if y.iter().any(|&v| v < lo - slack || v > hi + slack) {
                    return Err(MolError::Domain(format!("label outside [{lo}, {hi}]")));
                }
            }
            Potential::BinaryEntropy => {
                if y[0] < 0.0 || y[0] > 1.0 {
                    return Err(MolError::Domain(format!("label {} outside [0, 1]", y[0])));
                }
            }
            Potential::SimplexKl => {
                let s: f64 = y.iter().sum();
                if y.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-9 {
                    return Err(MolError::Domain("label outside the simplex".into()));
                }
            }
        }
        Ok(())
    }

    fn check_prediction(&self, yhat: &[f64]) -> Result<()> {
        self.check_label(yhat)?;
        match self.potential {
            Potential::Square { .. } => Ok(()),
            _ => {
                if yhat.iter().any(|&v| v <= 0.0 || v >= 1.0) {
                    Err(MolError::Boundary("prediction on the boundary where grad phi is undefined".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn phi(&self, y: &[f64]) -> Result<f64> {
        self.check_label(y)?;
        Ok(match self.potential {
            Potential::Square { .. } => y.iter().map(|v| v * v).sum(),
            Potential::BinaryEntropy => xlogx(y[0]) + xlogx(1.0 - y[0]),
            Potential::SimplexKl => y.iter().map(|&v| xlogx(v)).sum(),
        })
    }

    pub fn grad_phi(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_prediction(y)?;
        Ok(match self.potential {
            Potential::Square { .. } => y.iter().map(|v| 2.0 * v).collect(),
            Potential::BinaryEntropy => vec![(y[0] / (1.0 - y[0])).ln()],
            Potential::SimplexKl => y.iter().map(|v| v.ln() + 1.0).collect(),
        })
    }

    /// Diagonal of the Hessian of `phi` at an interior point.
    pub fn hessian_diag(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_prediction(y)?;
        Ok(match self.potential {
            Potential::Square { .. } => vec![2.0; self.q],
            Potential::BinaryEntropy => vec![1.0 / (y[0] * (1.0 - y[0]))],
            Potential::SimplexKl => y.iter().map(|v| 1.0 / v).collect(),
        })
    }

    pub fn divergence(&self, y: &[f64], yhat: &[f64]) -> Result<f64> {
        self.check_label(y)?;
        self.check_prediction(yhat)?;
        Ok(match self.potential {
            Potential::Square { .. } => y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum(),
            Potential::BinaryEntropy => xlogxy(y[0], yhat[0]) + xlogxy(1.0 - y[0], 1.0 - yhat[0]),
            Potential::SimplexKl => y.iter().zip(yhat).map(|(&a, &b)| xlogxy(a, b)).sum(),
        })
    }

    /// Gradient of the divergence in its second argument.
    pub fn divergence_grad(&self, y: &[f64], yhat: &[f64]) -> Result<Vec<f64>> {
        let h = self.hessian_diag(yhat)?;
        self.check_label(y)?;
        Ok(h.iter().zip(y.iter().zip(yhat)).map(|(h, (a, b))| h * (b - a)).collect())
    }

    /// Unchecked scalar divergence for `q = 1` hot loops.
    #[inline]
    pub fn div1(&self, y: f64, yhat: f64) -> f64 {
        match self.potential {
            Potential::BinaryEntropy => xlogxy(y, yhat) + xlogxy(1.0 - y, 1.0 - yhat),
            _ => (y - yhat) * (y - yhat),
        }
    }

    /// Unchecked scalar derivative in the second argument for `q = 1`.
    #[inline]
    pub fn ddiv1(&self, y: f64, yhat: f64) -> f64 {
        match self.potential {
            Potential::BinaryEntropy => (yhat - y) / (yhat * (1.0 - yhat)),
            _ => 2.0 * (yhat - y),
        }
    }

    /// Second derivative of `phi` for `q = 1`.
    #[inline]
    pub fn phi2_1(&self, yhat: f64) -> f64 {
        match self.potential {
            Potential::BinaryEntropy => 1.0 / (yhat * (1.0 - yhat)),
            _ => 2.0,
        }
    }

    pub fn same_potential(&self, other: &BregmanLoss) -> bool {
        self.q == other.q && std::mem::discriminant(&self.potential) == std::mem::discriminant(&other.potential)
    }
}

pub fn zero_one(y: f64, yhat: f64) -> Result<f64> {
    for v in [y, yhat] {
        if v != 0.0 && v != 1.0 {
            return Err(MolError::Domain(format!("zero-one loss needs labels in {{0, 1}}, got {v}")));
        }
    }
    Ok(if y == yhat { 0.0 } else { 1.0 })
}

/// Per-task loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskLoss {
    Bregman(BregmanLoss),
    ZeroOne,
}

impl TaskLoss {
    pub fn value(&self, y: &[f64], yhat: &[f64]) -> Result<f64> {
        match self {
            TaskLoss::Bregman(l) => l.divergence(y, yhat),
            TaskLoss::ZeroOne => {
                if y.len() != 1 || yhat.len() != 1 {
                    return Err(MolError::Shape("zero-one loss is scalar".into()));
                }
                zero_one(y[0], yhat[0])
            }
        }
    }

    pub fn bregman(&self) -> Option<&BregmanLoss> {
        match self {
            TaskLoss::Bregman(l) => Some(l),
            TaskLoss::ZeroOne => None,
        }
    }

    pub fn is_differentiable(&self) -> bool {
        matches!(self, TaskLoss::Bregman(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_matches_distance() {
        let l = make_square_loss(2);
        assert_eq!(l.divergence(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(l.lipschitz(), 2.0 * 2f64.sqrt());
    }

    #[test]
    fn entropy_boundary_label_is_allowed() {
        let l = make_binary_entropy_loss(None);
        let v = l.divergence(&[1.0 - 1e-12], &[0.5]).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-9);
        assert!(matches!(l.divergence(&[0.3], &[0.0]), Err(MolError::Boundary(_))));
        assert!(matches!(l.divergence(&[1.3], &[0.5]), Err(MolError::Domain(_))));
    }

    #[test]
    fn entropy_constants_at_default_eps() {
        let l = make_binary_entropy_loss(None);
        let s = sigmoid(-1.0) * sigmoid(1.0);
        assert!((l.lipschitz() - 1.5 / s).abs() < 1e-12);
        assert!((l.bound() + sigmoid(-1.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_one_values() {
        assert_eq!(zero_one(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(zero_one(1.0, 1.0).unwrap(), 0.0);
        assert!(zero_one(0.5, 1.0).is_err());
    }
}
