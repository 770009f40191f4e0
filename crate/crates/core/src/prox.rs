//! Closed-form proximal operators.
//!
//! For a step `γ > 0` the proximal map of `g` is
//! `prox(γ, z) = argmin_x g(x) + ‖x − z‖² / (2γ)`.
//! Every regularizer here has an exact closed form, so no inner solves are
//! ever performed.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A convex, proper, lower-semicontinuous function accessed through its value
/// and its proximal map.
pub trait ProxOracle {
    /// Value of `g`; `f64::INFINITY` outside the domain.
    fn value(&self, x: &DVector<f64>) -> f64;

    /// `argmin_x g(x) + ‖x − z‖² / (2 step)`.
    fn prox(&self, step: f64, z: &DVector<f64>) -> DVector<f64>;
}

/// Identity map; the proximal operator of `g = 0`.
pub fn prox_zero(_step: f64, z: &DVector<f64>) -> DVector<f64> {
    z.clone()
}

/// Soft threshold with threshold `step · weight`.
///
/// Components with `|zᵢ| ≤ τ` map to exactly zero.
pub fn prox_l1(weight: f64, step: f64, z: &DVector<f64>) -> DVector<f64> {
    let tau = step * weight;
    z.map(|zi| soft_threshold(zi, tau))
}

pub(crate) fn soft_threshold(zi: f64, tau: f64) -> f64 {
    if zi > tau {
        zi - tau
    } else if zi < -tau {
        zi + tau
    } else {
        0.0
    }
}

/// Prox of `(weight / 2)‖x‖²`: a uniform shrink.
pub fn prox_squared_l2(weight: f64, step: f64, z: &DVector<f64>) -> DVector<f64> {
    z / (1.0 + step * weight)
}

/// Projection onto `[lower, upper]`, independent of the step.
pub fn prox_box(lower: &[f64], upper: &[f64], _step: f64, z: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        z.len(),
        z.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&zi, (&lo, &hi))| zi.max(lo).min(hi)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// The regularizers available to test instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Zero,
    L1 {
        weight: f64,
    },
    SquaredL2 {
        weight: f64,
    },
    #[serde(rename = "box")]
    BoxIndicator {
        bounds: BoxBounds,
    },
}

impl Regularizer {
    pub fn l1(weight: f64) -> Result<Self> {
        let r = Regularizer::L1 { weight };
        r.validate(None)?;
        Ok(r)
    }

    pub fn squared_l2(weight: f64) -> Result<Self> {
        let r = Regularizer::SquaredL2 { weight };
        r.validate(None)?;
        Ok(r)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let r = Regularizer::BoxIndicator {
            bounds: BoxBounds { lower, upper },
        };
        r.validate(None)?;
        Ok(r)
    }

    /// Checks parameter ranges and, when `dimension` is given, that box
    /// bounds have matching length.
    pub fn validate(&self, dimension: Option<usize>) -> Result<()> {
        match self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { weight } | Regularizer::SquaredL2 { weight } => {
                if weight.is_finite() && *weight > 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(
                        "regularizer.weight",
                        format!("must be finite and > 0, got {weight}"),
                    ))
                }
            }
            Regularizer::BoxIndicator { bounds } => {
                if bounds.lower.len() != bounds.upper.len() {
                    return Err(Error::Dimension {
                        expected: bounds.lower.len(),
                        actual: bounds.upper.len(),
                    });
                }
                if let Some(n) = dimension {
                    if bounds.lower.len() != n {
                        return Err(Error::Dimension {
                            expected: n,
                            actual: bounds.lower.len(),
                        });
                    }
                }
                for (i, (lo, hi)) in bounds.lower.iter().zip(&bounds.upper).enumerate() {
                    if lo.is_nan() || hi.is_nan() || lo > hi {
                        return Err(Error::config(
                            "regularizer.bounds",
                            format!("component {i}: need lower <= upper, got [{lo}, {hi}]"),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }
}

impl ProxOracle for Regularizer {
    fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.lp_norm(1),
            Regularizer::SquaredL2 { weight } => 0.5 * weight * x.norm_squared(),
            Regularizer::BoxIndicator { bounds } => {
                let inside = x
                    .iter()
                    .zip(bounds.lower.iter().zip(&bounds.upper))
                    .all(|(&xi, (&lo, &hi))| lo <= xi && xi <= hi);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn prox(&self, step: f64, z: &DVector<f64>) -> DVector<f64> {
        match self {
            Regularizer::Zero => prox_zero(step, z),
            Regularizer::L1 { weight } => prox_l1(*weight, step, z),
            Regularizer::SquaredL2 { weight } => prox_squared_l2(*weight, step, z),
            Regularizer::BoxIndicator { bounds } => prox_box(&bounds.lower, &bounds.upper, step, z),
        }
    }
}
