//! Slow reference solver: cyclic pairwise coordinate descent over the `2l`
//! variables `(u1, u2)` in their box.
//!
//! Variable `t < l` is `u1_t` with sign `+1`, variable `l + t` is `u2_t` with
//! sign `-1`, so the equality constraint reads `sum_t s_t v_t = 0`. A pair
//! update moves `v_t += s_t d`, `v_s -= s_s d`, which keeps that sum fixed.
//! No minimal-sum shortcut is used: both sides of a sample are free.

use super::{DualSolution, ReducedDual};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub tol: f64,
    pub max_sweeps: u64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 200_000,
        }
    }
}

pub fn solve_reference(p: &ReducedDual, opts: &ReferenceOptions) -> Result<DualSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let l = p.len();
    let n = 2 * l;
    let (lo, hi, eps) = (p.lo(), p.hi(), p.eps());
    let gram = p.gram();
    let y = p.targets();
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let sample = |t: usize| if t < l { t } else { t - l };

    let mut v = vec![lo; n];
    // grad_t = s_t (G gamma)_i - s_t y_i + eps
    let mut fg = vec![0.0; l]; // G gamma
    let grad = |fg: &[f64], t: usize| sign(t) * (fg[sample(t)] - y[sample(t)]) + eps;

    let violation = |v: &[f64], fg: &[f64]| -> f64 {
        // Standard up/low index sets for sum s_t v_t = const.
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..n {
            let s = sign(t);
            let score = -s * grad(fg, t);
            let can_up = (s > 0.0 && v[t] < hi) || (s < 0.0 && v[t] > lo);
            let can_low = (s > 0.0 && v[t] > lo) || (s < 0.0 && v[t] < hi);
            if can_up {
                m = m.max(score);
            }
            if can_low {
                big_m = big_m.min(score);
            }
        }
        if m.is_finite() && big_m.is_finite() {
            (m - big_m).max(0.0)
        } else {
            0.0
        }
    };

    let mut sweeps = 0u64;
    while violation(&v, &fg) > opts.tol {
        if sweeps >= opts.max_sweeps {
            let s = DualSolution::from_parts(p, v[..l].to_vec(), v[l..].to_vec(), sweeps);
            return Err(Error::NotConverged {
                iterations: sweeps,
                residual: s.kkt_residual,
            });
        }
        sweeps += 1;
        for t in 0..n {
            for s in (t + 1)..n {
                let (st, ss) = (sign(t), sign(s));
                let (i, j) = (sample(t), sample(s));
                let slope = st * grad(&fg, t) - ss * grad(&fg, s);
                let curv = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
                // Feasible range of d from both boxes.
                let (mut d_lo, mut d_hi) = range(v[t], st, lo, hi);
                let (b_lo, b_hi) = range(v[s], -ss, lo, hi);
                d_lo = d_lo.max(b_lo);
                d_hi = d_hi.min(b_hi);
                if d_hi <= d_lo {
                    continue;
                }
                let d = if curv > 1e-14 {
                    (-slope / curv).clamp(d_lo, d_hi)
                } else if slope < 0.0 {
                    d_hi
                } else if slope > 0.0 {
                    d_lo
                } else {
                    0.0
                };
                let change = slope * d + 0.5 * curv.max(0.0) * d * d;
                if d == 0.0 || change >= 0.0 {
                    continue;
                }
                let old_t = v[t];
                let old_s = v[s];
                v[t] = (v[t] + st * d).clamp(lo, hi);
                v[s] = (v[s] - ss * d).clamp(lo, hi);
                let dgi = st * (v[t] - old_t);
                let dgj = ss * (v[s] - old_s);
                for k in 0..l {
                    fg[k] += dgi * gram[[i, k]] + dgj * gram[[j, k]];
                }
            }
        }
    }

    Ok(DualSolution::from_parts(p, v[..l].to_vec(), v[l..].to_vec(), sweeps))
}

/// Range of `d` keeping `v + dir * d` inside `[lo, hi]`.
fn range(v: f64, dir: f64, lo: f64, hi: f64) -> (f64, f64) {
    if dir > 0.0 {
        (lo - v, hi - v)
    } else {
        (v - hi, v - lo)
    }
}
