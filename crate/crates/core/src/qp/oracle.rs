//! Oracle on the unreduced dual with multipliers `alpha1, alpha2, beta1, beta2`.
//!
//! Each `alpha_i` ranges over `[0, tau1 C]` and fixes its partner through
//! `beta = tau2 (C - alpha / tau1)`. With `k = (tau2 - tau1) / tau1` that gives
//! `alpha + beta = tau2 C - k alpha`, so the dual objective is a convex
//! quadratic in `(alpha1, alpha2)` over a box intersected with the
//! hyperplane `sum(alpha1) = sum(alpha2)`. It is minimized by accelerated
//! projected gradient with adaptive restart; the projection is found by
//! bisection on the hyperplane multiplier.

use ndarray::{Array1, ArrayView1};

use super::{DualSolution, ReducedDual};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 2_000_000,
        }
    }
}

/// Full multiplier vectors together with the induced reduced solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDualSolution {
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub reduced: DualSolution,
}

impl FullDualSolution {
    /// `e'(alpha1 - alpha2 + beta1 - beta2)`.
    pub fn equality_residual(&self) -> f64 {
        (0..self.alpha1.len())
            .map(|i| self.alpha1[i] - self.alpha2[i] + self.beta1[i] - self.beta2[i])
            .sum()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn solve_full_oracle(
    gram: ndarray::ArrayView2<f64>,
    targets: ArrayView1<f64>,
    eps: f64,
    c: f64,
    tau1: f64,
    tau2: f64,
    opts: &OracleOptions,
) -> Result<FullDualSolution> {
    if !(tau2 > tau1 && tau1 > 0.0 && c > 0.0) {
        return Err(Error::invalid(format!(
            "oracle needs tau2 > tau1 > 0 and C > 0, got tau1={tau1}, tau2={tau2}, C={c}"
        )));
    }
    let p = ReducedDual::new(gram, targets, eps, tau1 * c, tau2 * c)?;
    let l = p.len();
    let cap = tau1 * c;
    let k = (tau2 - tau1) / tau1;

    // Objective in a = (alpha1, alpha2), up to the constant 2 l tau2 C eps:
    //   1/2 k^2 d'Gd + k d'y - eps k e'(alpha1 + alpha2),  d = alpha1 - alpha2
    let objective = |a1: &[f64], a2: &[f64]| -> f64 {
        let d = Array1::from_shape_fn(l, |i| a1[i] - a2[i]);
        let gd = gram.dot(&d);
        0.5 * k * k * d.dot(&gd) + k * d.dot(&targets) - eps * k * (a1.iter().sum::<f64>() + a2.iter().sum::<f64>())
    };
    let gradient = |a1: &[f64], a2: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let d = Array1::from_shape_fn(l, |i| a1[i] - a2[i]);
        let gd = gram.dot(&d);
        let g1: Vec<f64> = (0..l).map(|i| k * k * gd[i] + k * targets[i] - eps * k).collect();
        let g2: Vec<f64> = (0..l).map(|i| -k * k * gd[i] - k * targets[i] - eps * k).collect();
        (g1, g2)
    };

    // Lipschitz bound: Hessian is k^2 [[G, -G], [-G, G]] with norm 2 k^2 |G|.
    let row_sum_max = (0..l)
        .map(|i| gram.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let lipschitz = (2.0 * k * k * row_sum_max).max(1e-12);
    let step = 1.0 / lipschitz;

    // Scaled fixed-point residual of the projected gradient map, a
    // stationarity measure in the same units as the gradient.
    let gradient_map_residual = |a1: &[f64], a2: &[f64]| -> f64 {
        let (g1, g2) = gradient(a1, a2);
        let w1: Vec<f64> = (0..l).map(|i| a1[i] - step * g1[i]).collect();
        let w2: Vec<f64> = (0..l).map(|i| a2[i] - step * g2[i]).collect();
        let (p1, p2) = project(&w1, &w2, cap);
        let scale = g1.iter().chain(&g2).fold(1.0f64, |m, g| m.max(g.abs()));
        (0..l)
            .map(|i| (p1[i] - a1[i]).abs().max((p2[i] - a2[i]).abs()))
            .fold(0.0f64, f64::max)
            * lipschitz
            / scale
    };

    let mut x1 = vec![cap; l];
    let mut x2 = vec![cap; l];
    let mut z1 = x1.clone();
    let mut z2 = x2.clone();
    let mut momentum = 1.0f64;
    let mut f_prev = objective(&x1, &x2);
    let mut iterations = 0u64;
    let mut converged = false;

    while iterations < opts.max_iter {
        if iterations % 50 == 0 && gradient_map_residual(&x1, &x2) <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (g1, g2) = gradient(&z1, &z2);
        let w1: Vec<f64> = (0..l).map(|i| z1[i] - step * g1[i]).collect();
        let w2: Vec<f64> = (0..l).map(|i| z2[i] - step * g2[i]).collect();
        let (n1, n2) = project(&w1, &w2, cap);

        let f_new = objective(&n1, &n2);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let plain_step = z1 == x1 && z2 == x2;
        if f_new > f_prev && !plain_step {
            // Restart: drop momentum and retry from the last iterate.
            momentum = 1.0;
            z1.clone_from(&x1);
            z2.clone_from(&x2);
            continue;
        }
        let beta = (momentum - 1.0) / next_momentum;
        for i in 0..l {
            z1[i] = n1[i] + beta * (n1[i] - x1[i]);
            z2[i] = n2[i] + beta * (n2[i] - x2[i]);
        }
        x1 = n1;
        x2 = n2;
        momentum = next_momentum;
        f_prev = f_new;
    }

    let u1: Vec<f64> = x1.iter().map(|a| tau2 * c - k * a).collect();
    let u2: Vec<f64> = x2.iter().map(|a| tau2 * c - k * a).collect();
    let beta1: Vec<f64> = x1.iter().map(|a| tau2 * (c - a / tau1)).collect();
    let beta2: Vec<f64> = x2.iter().map(|a| tau2 * (c - a / tau1)).collect();
    let reduced = DualSolution::from_parts(&p, u1, u2, iterations);
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: reduced.kkt_residual,
        });
    }
    Ok(FullDualSolution {
        alpha1: x1,
        alpha2: x2,
        beta1,
        beta2,
        reduced,
    })
}

/// Euclidean projection of `(w1, w2)` onto
/// `{0 <= a <= cap, sum(a1) = sum(a2)}`.
fn project(w1: &[f64], w2: &[f64], cap: f64) -> (Vec<f64>, Vec<f64>) {
    let clip = |v: f64| v.clamp(0.0, cap);
    // h(mu) = sum clip(w1 - mu) - sum clip(w2 + mu) is non-increasing in mu.
    let h = |mu: f64| -> f64 {
        w1.iter().map(|&w| clip(w - mu)).sum::<f64>() - w2.iter().map(|&w| clip(w + mu)).sum::<f64>()
    };
    let spread = w1
        .iter()
        .chain(w2)
        .fold(0.0f64, |m, w| m.max(w.abs()))
        + cap;
    let (mut lo, mut hi) = (-spread, spread);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut a1: Vec<f64> = w1.iter().map(|&w| clip(w - mu)).collect();
    let mut a2: Vec<f64> = w2.iter().map(|&w| clip(w + mu)).collect();

    // Remove the last rounding-level imbalance on a free coordinate.
    let imbalance: f64 = a1.iter().sum::<f64>() - a2.iter().sum::<f64>();
    if imbalance != 0.0 {
        if let Some(i) = (0..a1.len()).find(|&i| a1[i] - imbalance > 0.0 && a1[i] - imbalance < cap) {
            a1[i] -= imbalance;
        } else if let Some(i) = (0..a2.len()).find(|&i| a2[i] + imbalance > 0.0 && a2[i] + imbalance < cap) {
            a2[i] += imbalance;
        }
    }
    (a1, a2)
}
