//! Pointwise losses on a residual `u = y - f(x)`.
//!
//! The reward-cum-penalty loss is `max(tau2 (|u| - eps), tau1 (|u| - eps))`.
//! Outside the tube (`|u| > eps`) it charges `tau2` per unit of excess;
//! inside it is negative, a reward of `tau1 (eps - |u|)`. With
//! `(tau1, tau2) = (0, 1)` it is the usual eps-insensitive loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub tau1: f64,
    pub tau2: f64,
    pub eps: f64,
}

impl LossParams {
    /// Parameters in the convex regime `tau2 >= tau1 >= 0`, `eps > 0`.
    pub fn new(tau1: f64, tau2: f64, eps: f64) -> Result<Self> {
        let p = Self { tau1, tau2, eps };
        p.validate()?;
        Ok(p)
    }

    /// Skips the convexity checks. Only meant for drawing loss curves with
    /// `tau1 < 0`; training never accepts such parameters.
    pub fn allow_nonconvex(tau1: f64, tau2: f64, eps: f64) -> Self {
        Self { tau1, tau2, eps }
    }

    pub fn validate(&self) -> Result<()> {
        let LossParams { tau1, tau2, eps } = *self;
        if ![tau1, tau2, eps].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("loss parameters"));
        }
        if tau1 < 0.0 {
            return Err(Error::invalid(format!("tau1 must be >= 0 (convex regime), got {tau1}")));
        }
        if tau2 < tau1 {
            return Err(Error::invalid(format!("tau2 ({tau2}) must be >= tau1 ({tau1})")));
        }
        if eps <= 0.0 {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        self.validate().is_ok()
    }
}

/// Reward-cum-penalty loss. Negative values are rewards.
pub fn rp_loss(u: f64, p: &LossParams) -> f64 {
    let excess = u.abs() - p.eps;
    (p.tau2 * excess).max(p.tau1 * excess)
}

pub fn eps_insensitive(u: f64, eps: f64) -> f64 {
    (u.abs() - eps).max(0.0)
}

/// Sign convention used by the influence function: `sign(0) = -1`.
fn sign(u: f64) -> f64 {
    if u <= 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Derivative of [`rp_loss`] with respect to the residual (a subgradient at
/// the kinks). Always within `[-tau2, tau2]`.
pub fn influence(u: f64, p: &LossParams) -> f64 {
    if u.abs() <= p.eps {
        p.tau1 * sign(u)
    } else {
        p.tau2 * sign(u)
    }
}

/// Normalizer of `exp(-rp_loss(xi))` over the real line:
/// `2 [ (exp(tau1 eps) - 1) / tau1 + 1 / tau2 ]`, with the `tau1 -> 0`
/// limit `2 (eps + 1 / tau2)`.
pub fn rp_density_normalizer(p: &LossParams) -> Result<f64> {
    if p.tau2 <= 0.0 {
        return Err(Error::invalid(format!("density needs tau2 > 0, got {}", p.tau2)));
    }
    if p.tau1 < 0.0 {
        return Err(Error::invalid(format!("density needs tau1 >= 0, got {}", p.tau1)));
    }
    let inner = if p.tau1 == 0.0 {
        p.eps
    } else {
        (p.tau1 * p.eps).exp_m1() / p.tau1
    };
    Ok(2.0 * (inner + 1.0 / p.tau2))
}

/// Noise density whose negative log-likelihood is the reward-cum-penalty loss.
pub fn rp_density(xi: f64, p: &LossParams) -> Result<f64> {
    let z = rp_density_normalizer(p)?;
    Ok((-rp_loss(xi, p)).exp() / z)
}

pub fn huber_loss(u: f64, c: f64) -> f64 {
    debug_assert!(c > 0.0);
    if u.abs() < c {
        u * u / (2.0 * c)
    } else {
        u.abs() - c / 2.0
    }
}

pub fn laplace_loss(u: f64) -> f64 {
    u.abs()
}
