//! Pairwise working-set solver on `gamma = u1 - u2`.
//!
//! For a fixed `gamma_i` the cheapest feasible split is
//! `u1_i = lo + max(gamma_i, 0)`, `u2_i = lo + max(-gamma_i, 0)`, because the
//! objective charges `eps` per unit of `u1 + u2`. Substituting leaves
//!
//! ```text
//! min 1/2 gamma' G gamma - gamma' y + eps |gamma|_1 + 2 l lo eps
//! s.t. e' gamma = 0,  |gamma_i| <= hi - lo
//! ```
//!
//! Each step picks the maximal violating pair `(i, j)` of directional
//! derivatives, then moves `gamma_i += t`, `gamma_j -= t` to the exact
//! minimizer of the piecewise-quadratic one-dimensional subproblem.

use std::io::Write;

use log::debug;
use serde::{Deserialize, Serialize};

use super::{kkt_residual_with_outputs, DualSolution, ReducedDual, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SmoOptions {
    pub tol: f64,
    pub max_iter: u64,
    /// Record the objective after every pair update.
    pub trace: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            trace: false,
        }
    }
}

/// One pair update, for debugging dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: u64,
    pub i: usize,
    pub j: usize,
    pub step: f64,
    pub violation: f64,
    pub objective: f64,
}

/// Writes trace steps as JSON lines.
pub fn write_trace_jsonl<W: Write>(steps: &[TraceStep], mut out: W) -> Result<()> {
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

const CURVATURE_JITTER: f64 = 1e-10;

/// Solves the reduced dual. On success the returned solution satisfies
/// `kkt_residual <= opts.tol`. The trace, if requested, is returned alongside.
pub fn solve_smo(p: &ReducedDual, opts: &SmoOptions) -> Result<(DualSolution, Vec<TraceStep>)> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut state = State::new(p);
    let mut trace = Vec::new();
    let mut threshold = opts.tol;
    let mut iterations = 0u64;
    let mut stalled = 0u32;

    loop {
        let pair = state.select_pair();
        let violation = pair.map_or(0.0, |(_, _, v)| v);
        if violation <= threshold {
            state.refresh_gradient();
            let residual = state.residual();
            if residual <= opts.tol {
                break;
            }
            // The pair gap is small but the bias reconstruction still
            // sees a violation; tighten and continue.
            if threshold < 1e-15 * (1.0 + state.scale) {
                debug!("smo: cannot tighten further, residual {residual:.3e}");
                return Err(Error::NotConverged { iterations, residual });
            }
            threshold *= 0.1;
            continue;
        }
        if iterations >= opts.max_iter {
            state.refresh_gradient();
            return Err(Error::NotConverged {
                iterations,
                residual: state.residual(),
            });
        }
        let (i, j, _) = pair.expect("violation implies a pair");
        let step = state.update_pair(i, j);
        iterations += 1;
        if step == 0.0 {
            // Rounding can leave a violating pair with no representable
            // improvement.
            stalled += 1;
            state.refresh_gradient();
            let residual = state.residual();
            if residual <= opts.tol {
                break;
            }
            if stalled > 2 {
                return Err(Error::NotConverged { iterations, residual });
            }
            continue;
        }
        stalled = 0;
        if opts.trace {
            let (u1, u2) = state.split();
            trace.push(TraceStep {
                iteration: iterations,
                i,
                j,
                step,
                violation,
                objective: p.objective(&u1, &u2),
            });
        }
    }

    let (u1, u2) = state.split();
    let solution = DualSolution::from_parts(p, u1, u2, iterations);
    Ok((solution, trace))
}

struct State<'p, 'a> {
    p: &'p ReducedDual<'a>,
    gamma: Vec<f64>,
    /// `G gamma - y`
    grad: Vec<f64>,
    /// Box half-width `hi - lo`.
    cap: f64,
    scale: f64,
}

impl<'p, 'a> State<'p, 'a> {
    fn new(p: &'p ReducedDual<'a>) -> Self {
        let l = p.len();
        let grad: Vec<f64> = p.targets().iter().map(|y| -y).collect();
        let scale = p.targets().iter().fold(0.0f64, |m, y| m.max(y.abs()));
        Self {
            p,
            gamma: vec![0.0; l],
            grad,
            cap: p.hi() - p.lo(),
            scale,
        }
    }

    fn up_derivative(&self, i: usize) -> Option<f64> {
        let g = self.gamma[i];
        (g < self.cap - self.bound_slack()).then(|| self.grad[i] + if g >= 0.0 { self.p.eps() } else { -self.p.eps() })
    }

    fn down_derivative(&self, i: usize) -> Option<f64> {
        let g = self.gamma[i];
        (g > -self.cap + self.bound_slack()).then(|| -self.grad[i] + if g <= 0.0 { self.p.eps() } else { -self.p.eps() })
    }

    /// Values this close to a bound count as on it; a move there would be
    /// lost to rounding.
    fn bound_slack(&self) -> f64 {
        1e-12 * self.cap
    }

    /// Maximal violating pair `(up, down, violation)`; lowest index wins ties.
    fn select_pair(&self) -> Option<(usize, usize, f64)> {
        let l = self.gamma.len();
        let mut up = Best2::default();
        let mut down = Best2::default();
        for i in 0..l {
            if let Some(d) = self.up_derivative(i) {
                up.offer(i, d);
            }
            if let Some(d) = self.down_derivative(i) {
                down.offer(i, d);
            }
        }
        let candidates = [(up.first, down.first), (up.first, down.second), (up.second, down.first)];
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, b) in candidates {
            if let (Some((i, di)), Some((j, dj))) = (a, b) {
                if i == j {
                    continue;
                }
                let v = -(di + dj);
                let better = match best {
                    None => true,
                    Some((bi, bj, bv)) => v > bv || (v == bv && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((i, j, v));
                }
            }
        }
        best
    }

    /// Exact minimization of the objective along `gamma_i += t, gamma_j -= t`.
    /// Returns the step taken.
    fn update_pair(&mut self, i: usize, j: usize) -> f64 {
        let g = self.p.gram();
        let eps = self.p.eps();
        let (gi, gj) = (self.gamma[i], self.gamma[j]);
        let mut eta = g[[i, i]] + g[[j, j]] - 2.0 * g[[i, j]];
        if eta <= 0.0 {
            debug!("smo: non-positive curvature {eta:.3e} on pair ({i}, {j}), adding jitter");
            eta = CURVATURE_JITTER;
        }
        let a = self.grad[i] - self.grad[j];
        let cap = self.cap;
        let t_lo = (-cap - gi).max(gj - cap);
        let t_hi = (cap - gi).min(gj + cap);

        // Change of the objective along the step. The l1 term is written
        // without cancellation so tiny improvements near the optimum stay
        // visible.
        let phi = |t: f64| 0.5 * eta * t * t + a * t + eps * (abs_change(gi, t) + abs_change(gj, -t));

        // Breakpoints where gamma_i or gamma_j crosses zero.
        let mut knots = vec![t_lo, t_hi];
        for k in [-gi, gj] {
            if k > t_lo && k < t_hi {
                knots.push(k);
            }
        }
        knots.sort_by(|x, y| x.partial_cmp(y).expect("finite"));

        let mut best_t = 0.0;
        let mut best_val = 0.0;
        let mut consider = |t: f64| {
            let v = phi(t);
            if v < best_val {
                best_val = v;
                best_t = t;
            }
        };
        for w in knots.windows(2) {
            let (s, e) = (w[0], w[1]);
            consider(s);
            consider(e);
            if e > s {
                let mid = 0.5 * (s + e);
                let si = if gi + mid >= 0.0 { 1.0 } else { -1.0 };
                let sj = if gj - mid >= 0.0 { 1.0 } else { -1.0 };
                let t = (-(a + eps * (si - sj)) / eta).clamp(s, e);
                consider(t);
            }
        }
        if best_t == 0.0 {
            return 0.0;
        }

        // Land exactly on whichever knot or bound the step reached, then
        // restore the pair sum through the other variable.
        let sum = gi + gj;
        let (mut new_i, mut new_j) = (gi + best_t, gj - best_t);
        let (mut pin_i, mut pin_j) = (false, false);
        if best_t == -gi {
            new_i = 0.0;
            pin_i = true;
        }
        if best_t == gj {
            new_j = 0.0;
            pin_j = true;
        }
        if best_t == t_hi {
            if cap - gi <= gj + cap {
                new_i = cap;
                pin_i = true;
            } else {
                new_j = -cap;
                pin_j = true;
            }
        }
        if best_t == t_lo {
            if -cap - gi >= gj - cap {
                new_i = -cap;
                pin_i = true;
            } else {
                new_j = cap;
                pin_j = true;
            }
        }
        if pin_j && !pin_i {
            new_i = (sum - new_j).clamp(-cap, cap);
        } else {
            new_j = (sum - new_i).clamp(-cap, cap);
        }
        if new_i == gi && new_j == gj {
            return 0.0;
        }

        let delta = new_i - gi;
        let row_i = g.row(i);
        let row_j = g.row(j);
        for (k, gk) in self.grad.iter_mut().enumerate() {
            *gk += delta * (row_i[k] - row_j[k]);
        }
        self.gamma[i] = new_i;
        self.gamma[j] = new_j;
        delta
    }

    fn refresh_gradient(&mut self) {
        let f0 = self.p.biasless_outputs(&self.gamma);
        for (k, gk) in self.grad.iter_mut().enumerate() {
            *gk = f0[k] - self.p.targets()[k];
        }
    }

    fn residual(&self) -> f64 {
        let (u1, u2) = self.split();
        let f0: Vec<f64> = self.grad.iter().zip(self.p.targets()).map(|(g, y)| g + y).collect();
        kkt_residual_with_outputs(self.p, &u1, &u2, &f0)
    }

    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.p.lo();
        let u1 = self.gamma.iter().map(|&g| lo + g.max(0.0)).collect();
        let u2 = self.gamma.iter().map(|&g| lo + (-g).max(0.0)).collect();
        (u1, u2)
    }
}

/// `|g + t| - |g|`, exact while `g + t` keeps the sign of `g`.
fn abs_change(g: f64, t: f64) -> f64 {
    let moved = g + t;
    if g >= 0.0 && moved >= 0.0 {
        t
    } else if g <= 0.0 && moved <= 0.0 {
        -t
    } else {
        moved.abs() - g.abs()
    }
}

#[derive(Default)]
struct Best2 {
    first: Option<(usize, f64)>,
    second: Option<(usize, f64)>,
}

impl Best2 {
    fn offer(&mut self, i: usize, d: f64) {
        match self.first {
            Some((_, f)) if d >= f => match self.second {
                Some((_, s)) if d >= s => {}
                _ => self.second = Some((i, d)),
            },
            _ => {
                self.second = self.first;
                self.first = Some((i, d));
            }
        }
    }
}
