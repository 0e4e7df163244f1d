//! The reward-cum-penalty SVR dual and its solvers.
//!
//! The dual has four multiplier vectors `alpha1, alpha2, beta1, beta2 >= 0`
//! tied together by `C - alpha1/tau1 - beta1/tau2 = 0` (and the same for
//! side 2). The objective only sees the sums `u1 = alpha1 + beta1` and
//! `u2 = alpha2 + beta2`, and the equality constraints sweep each sum over
//! exactly `[tau1 C, tau2 C]`. Eliminating the split gives the reduced
//! problem solved here:
//!
//! ```text
//! min  1/2 (u1-u2)' G (u1-u2) - (u1-u2)' y + eps e'(u1+u2)
//! s.t. e'(u1-u2) = 0,   lo <= u1, u2 <= hi,   lo = tau1 C, hi = tau2 C
//! ```
//!
//! Three solvers are provided. [`solve_smo`] is the production solver and
//! works on `gamma = u1 - u2`. [`solve_reference`] runs cyclic pairwise
//! coordinate descent directly on `(u1, u2)`. [`solve_full_oracle`] works
//! on the unreduced multipliers. The last two exist to check the first.

mod oracle;
mod reference;
mod smo;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use oracle::{solve_full_oracle, FullDualSolution, OracleOptions};
pub use reference::{solve_reference, ReferenceOptions};
pub use smo::{solve_smo, write_trace_jsonl, SmoOptions, TraceStep};

/// Default tolerance on the maximal KKT violation.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default cap on pair updates.
pub const DEFAULT_MAX_ITER: u64 = 10_000_000;

/// The reduced dual over `(u1, u2)`; borrows the Gram matrix and targets.
#[derive(Debug, Clone, Copy)]
pub struct ReducedDual<'a> {
    gram: ArrayView2<'a, f64>,
    targets: ArrayView1<'a, f64>,
    eps: f64,
    lo: f64,
    hi: f64,
}

impl<'a> ReducedDual<'a> {
    pub fn new(
        gram: ArrayView2<'a, f64>,
        targets: ArrayView1<'a, f64>,
        eps: f64,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        let l = targets.len();
        if gram.nrows() != l || gram.ncols() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                got: gram.nrows().max(gram.ncols()),
            });
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix"));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        for i in 0..l {
            for j in 0..i {
                if gram[[i, j]] != gram[[j, i]] {
                    return Err(Error::invalid(format!("Gram matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {eps}")));
        }
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!("need hi > lo >= 0, got lo={lo}, hi={hi}")));
        }
        Ok(Self { gram, targets, eps, lo, hi })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn gram(&self) -> ArrayView2<'a, f64> {
        self.gram
    }

    pub fn targets(&self) -> ArrayView1<'a, f64> {
        self.targets
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Margin used to decide whether a variable sits on a bound.
    pub fn interior_margin(&self) -> f64 {
        1e-8 * (self.hi - self.lo)
    }

    /// Dual objective at `(u1, u2)`.
    pub fn objective(&self, u1: &[f64], u2: &[f64]) -> f64 {
        let gamma: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
        let g = Array1::from_vec(gamma);
        let quad = 0.5 * g.dot(&self.gram.dot(&g));
        let lin = g.dot(&self.targets);
        let sum: f64 = u1.iter().chain(u2).sum();
        quad - lin + self.eps * sum
    }

    /// `G gamma`, the bias-free regressor evaluated at the training points.
    pub fn biasless_outputs(&self, gamma: &[f64]) -> Array1<f64> {
        self.gram.dot(&ArrayView1::from(gamma))
    }
}

/// Result of a dual solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: u64,
}

impl DualSolution {
    /// Coefficients `gamma = u1 - u2` of the kernel expansion.
    pub fn gamma(&self) -> Vec<f64> {
        self.u1.iter().zip(&self.u2).map(|(a, b)| a - b).collect()
    }

    pub fn len(&self) -> usize {
        self.u1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u1.is_empty()
    }

    /// Assembles a solution from `(u1, u2)`, filling in objective and residual.
    pub fn from_parts(p: &ReducedDual, u1: Vec<f64>, u2: Vec<f64>, iterations: u64) -> Self {
        let objective = p.objective(&u1, &u2);
        let mut s = DualSolution {
            u1,
            u2,
            objective,
            kkt_residual: 0.0,
            iterations,
        };
        s.kkt_residual = kkt_residual(p, &s);
        s
    }
}

/// Splits a reduced variable back into `(alpha, beta)` using
/// `alpha / tau1 + beta / tau2 = C` and `alpha + beta = u`.
///
/// Requires `tau2 > tau1`. For `tau1 = 0` alpha is identically zero.
pub fn recover_multipliers(u: f64, c: f64, tau1: f64, tau2: f64) -> (f64, f64) {
    let alpha = tau1 * (tau2 * c - u) / (tau2 - tau1);
    (alpha, u - alpha)
}

/// Bias from the interior variables: every `i` with `u1_i` strictly inside
/// the box lies on the upper tube edge (`b = y_i - f0_i - eps`), every `j`
/// with `u2_j` inside lies on the lower edge (`b = y_j - f0_j + eps`); the
/// estimates are averaged.
///
/// With no interior variable, `b` is the midpoint of the interval allowed
/// by the bound-side KKT inequalities.
pub fn bias(p: &ReducedDual, u1: &[f64], u2: &[f64]) -> f64 {
    let gamma: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
    let f0 = p.biasless_outputs(&gamma);
    bias_with_outputs(p, u1, u2, f0.as_slice().expect("contiguous"))
}

fn bias_with_outputs(p: &ReducedDual, u1: &[f64], u2: &[f64], f0: &[f64]) -> f64 {
    let delta = p.interior_margin();
    let (lo, hi, eps) = (p.lo, p.hi, p.eps);
    let y = p.targets;

    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..p.len() {
        if u1[i] > lo + delta && u1[i] < hi - delta {
            sum += y[i] - f0[i] - eps;
            count += 1;
        }
        if u2[i] > lo + delta && u2[i] < hi - delta {
            sum += y[i] - f0[i] + eps;
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }

    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..p.len() {
        let upper_edge = y[i] - f0[i] - eps;
        let lower_edge = y[i] - f0[i] + eps;
        if u1[i] <= lo + delta {
            lower = lower.max(upper_edge);
        } else {
            upper = upper.min(upper_edge);
        }
        if u2[i] <= lo + delta {
            upper = upper.min(lower_edge);
        } else {
            lower = lower.max(lower_edge);
        }
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// Largest KKT violation of `s`: box feasibility, the equality constraint,
/// and complementary slackness with the bias reconstructed by [`bias`].
///
/// With `r_i = y_i - f0_i - b`, the stationarity conditions read
/// `u1_i` at lo => `r_i <= eps`, at hi => `r_i >= eps`, interior => `r_i = eps`,
/// and mirrored for `u2_i` around `-eps`.
pub fn kkt_residual(p: &ReducedDual, s: &DualSolution) -> f64 {
    let gamma = s.gamma();
    let f0 = p.biasless_outputs(&gamma);
    let f0 = f0.as_slice().expect("contiguous");
    kkt_residual_with_outputs(p, &s.u1, &s.u2, f0)
}

pub(crate) fn kkt_residual_with_outputs(p: &ReducedDual, u1: &[f64], u2: &[f64], f0: &[f64]) -> f64 {
    let (lo, hi, eps) = (p.lo, p.hi, p.eps);
    let delta = p.interior_margin();
    let mut worst: f64 = 0.0;

    for &u in u1.iter().chain(u2) {
        worst = worst.max(lo - u).max(u - hi);
    }
    let eq: f64 = u1.iter().zip(u2).map(|(a, b)| a - b).sum();
    worst = worst.max(eq.abs());

    let b = bias_with_outputs(p, u1, u2, f0);
    let y = p.targets;
    for i in 0..p.len() {
        let r = y[i] - f0[i] - b;
        // Derivatives of the Lagrangian in u1_i and u2_i.
        for (u, d) in [(u1[i], eps - r), (u2[i], eps + r)] {
            if u < hi - delta {
                worst = worst.max(-d);
            }
            if u > lo + delta {
                worst = worst.max(d);
            }
        }
    }
    worst
}
