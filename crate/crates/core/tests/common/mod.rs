//! Independent helpers shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

/// Solution of the plain eps-SVR dual in its textbook `2l`-variable form.
pub struct DirectSolution {
    pub gamma: Vec<f64>,
    pub bias: f64,
    /// Whether the exact free-set solve was accepted.
    pub polished: bool,
}

/// Plain eps-SVR dual over `(beta1, beta2)` in `[0, C]^2l` with
/// `sum(beta1 - beta2) = 0`, solved by second-order working-set SMO in the
/// classic LIBSVM layout and then polished by an exact KKT solve on the free
/// set. Shares no code with the crate's solvers.
pub fn direct_eps_svr(k: &Array2<f64>, y: &Array1<f64>, c: f64, eps: f64) -> DirectSolution {
    let l = y.len();
    let n = 2 * l;
    let base = |a: usize| a % l;
    let z = |a: usize| if a < l { 1.0 } else { -1.0 };
    let kk = |a: usize, b: usize| k[[base(a), base(b)]];
    let p: Vec<f64> = (0..n).map(|a| eps - z(a) * y[base(a)]).collect();

    let mut alpha = vec![0.0; n];
    let mut grad = p.clone();
    for _ in 0..10_000_000u64 {
        let in_up = |a: usize, al: &[f64]| if z(a) > 0.0 { al[a] < c } else { al[a] > 0.0 };
        let in_low = |a: usize, al: &[f64]| if z(a) > 0.0 { al[a] > 0.0 } else { al[a] < c };
        let (mut gmax, mut i) = (f64::NEG_INFINITY, usize::MAX);
        for a in 0..n {
            if in_up(a, &alpha) && -z(a) * grad[a] >= gmax {
                gmax = -z(a) * grad[a];
                i = a;
            }
        }
        let (mut gmax2, mut j, mut best) = (f64::NEG_INFINITY, usize::MAX, f64::INFINITY);
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let v = z(t) * grad[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 && i != usize::MAX {
                let quad = (kk(i, i) + kk(t, t) - 2.0 * kk(i, t)).max(1e-12);
                let obj = -diff * diff / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < 1e-13 || j == usize::MAX {
            break;
        }
        let (oi, oj) = (alpha[i], alpha[j]);
        let qij = z(i) * z(j) * kk(i, j);
        if z(i) != z(j) {
            let quad = (kk(i, i) + kk(j, j) + 2.0 * qij).max(1e-12);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kk(i, i) + kk(j, j) - 2.0 * qij).max(1e-12);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        for t in 0..n {
            grad[t] += z(t) * (z(i) * kk(t, i) * di + z(j) * kk(t, j) * dj);
        }
    }

    let gamma_of = |al: &[f64]| (0..l).map(|i| al[i] - al[l + i]).collect::<Vec<f64>>();
    // Stationarity reads grad_a + b z_a = 0 on the free set, >= 0 at 0, <= 0 at C.
    let free: Vec<usize> = (0..n).filter(|&a| alpha[a] > 1e-12 * c && alpha[a] < c * (1.0 - 1e-12)).collect();
    if !free.is_empty() {
        let m = free.len();
        let bounded: Vec<usize> = (0..n).filter(|a| !free.contains(a)).collect();
        let mut mat = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &f) in free.iter().enumerate() {
            for (s, &g) in free.iter().enumerate() {
                mat[(r, s)] = z(f) * z(g) * kk(f, g);
            }
            mat[(r, m)] = z(f);
            mat[(m, r)] = z(f);
            rhs[r] = -p[f] - bounded.iter().map(|&b| z(f) * z(b) * kk(f, b) * alpha[b]).sum::<f64>();
        }
        rhs[m] = -bounded.iter().map(|&b| z(b) * alpha[b]).sum::<f64>();
        if let Some(sol) = mat.lu().solve(&rhs) {
            let mut polished = alpha.clone();
            for (r, &f) in free.iter().enumerate() {
                polished[f] = sol[r];
            }
            let b = sol[m];
            let gamma = gamma_of(&polished);
            let ok = free.iter().all(|&f| polished[f] >= 0.0 && polished[f] <= c)
                && bounded.iter().all(|&a| {
                    let g: f64 = p[a] + z(a) * (0..l).map(|i| k[[base(a), i]] * gamma[i]).sum::<f64>() + b * z(a);
                    if alpha[a] <= 0.0 {
                        g >= -1e-9
                    } else {
                        g <= 1e-9
                    }
                });
            if ok {
                return DirectSolution { gamma, bias: b, polished: true };
            }
        }
    }
    // No usable free set: the middle of the interval the bounded KKT
    // conditions leave open for b.
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..n {
        let at_zero = alpha[a] <= 0.0;
        // grad + b z >= 0 at zero, <= 0 at C.
        let bound = -grad[a] / z(a);
        match (at_zero, z(a) > 0.0) {
            (true, true) | (false, false) => lower = lower.max(bound),
            _ => upper = upper.min(bound),
        }
    }
    let bias = match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        _ => 0.0,
    };
    DirectSolution {
        gamma: gamma_of(&alpha),
        bias,
        polished: false,
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    step(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}
