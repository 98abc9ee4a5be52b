//! Strongly concave policy regularizers.
//!
//! All kinds are nonnegative on the simplex. The entropy bonus is the scaled
//! Shannon entropy; the negative-squared-L2 kind is offset by its scale so
//! that `h(u) = lambda * (1 - ||u||^2) >= 0` (gradients are unchanged by the
//! offset).

use serde::{Deserialize, Serialize};

use crate::types::Distribution;
use crate::{Error, Result};

/// Floor for log arguments so boundary points evaluate finitely.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    Entropy,
    NegSquaredL2,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    /// Scale lambda >= 0.
    pub scale: f64,
}

impl Regularizer {
    pub fn entropy(scale: f64) -> Result<Self> {
        Self::new(RegularizerKind::Entropy, scale)
    }

    pub fn neg_squared_l2(scale: f64) -> Result<Self> {
        Self::new(RegularizerKind::NegSquaredL2, scale)
    }

    pub fn zero() -> Self {
        Self {
            kind: RegularizerKind::Zero,
            scale: 0.0,
        }
    }

    pub fn new(kind: RegularizerKind, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularizer scale must be >= 0, got {scale}"
            )));
        }
        Ok(Self { kind, scale })
    }

    /// h(u) for a weight row on the simplex.
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self.kind {
            RegularizerKind::Entropy => {
                let mut h = 0.0;
                for &x in u {
                    if x > 0.0 {
                        h -= x * x.max(LOG_FLOOR).ln();
                    }
                }
                self.scale * h
            }
            RegularizerKind::NegSquaredL2 => {
                let sq: f64 = u.iter().map(|x| x * x).sum();
                self.scale * (1.0 - sq)
            }
            RegularizerKind::Zero => 0.0,
        }
    }

    /// Gradient of h at `u`, written into `out`.
    pub fn grad_into(&self, u: &[f64], out: &mut [f64]) {
        match self.kind {
            RegularizerKind::Entropy => {
                for (o, &x) in out.iter_mut().zip(u) {
                    *o = -self.scale * (x.max(LOG_FLOOR).ln() + 1.0);
                }
            }
            RegularizerKind::NegSquaredL2 => {
                for (o, &x) in out.iter_mut().zip(u) {
                    *o = -2.0 * self.scale * x;
                }
            }
            RegularizerKind::Zero => out.fill(0.0),
        }
    }

    /// Strong-concavity modulus with respect to the L2 norm on the simplex.
    pub fn strong_concavity(&self) -> f64 {
        match self.kind {
            // -d^2/du^2 of entropy is lambda/u >= lambda since u <= 1
            RegularizerKind::Entropy => self.scale,
            RegularizerKind::NegSquaredL2 => 2.0 * self.scale,
            RegularizerKind::Zero => 0.0,
        }
    }

    /// The maximizing distribution over `n` actions.
    pub fn u_max(&self, n: usize) -> Distribution {
        // uniform maximizes every supported kind (for zero any point does;
        // uniform is the canonical choice)
        Distribution::uniform(n)
    }

    /// h(u_max) over `n` actions.
    pub fn h_max(&self, n: usize) -> f64 {
        match self.kind {
            RegularizerKind::Entropy => self.scale * (n as f64).ln(),
            RegularizerKind::NegSquaredL2 => self.scale * (1.0 - 1.0 / n as f64),
            RegularizerKind::Zero => 0.0,
        }
    }
}
