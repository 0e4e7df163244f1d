//! Training and prediction for RP-eps-SVR and eps-SVR.
//!
//! A fit builds the Gram matrix, solves the reduced dual on the box
//! `[tau1 C, tau2 C]`, recovers the bias from the interior variables and
//! keeps only the training rows with a nonzero coefficient. The plain
//! eps-SVR is the special case `(tau1, tau2) = (0, 1)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{fit_scaling, Dataset, ScalingState};
use crate::error::{Error, Result};
use crate::kernel::{gram, KernelSpec};
use crate::qp::{self, recover_multipliers, solve_smo, DualSolution, ReducedDual, SmoOptions};

/// Full parameterization of one fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub eps: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub kernel: KernelSpec,
}

impl HyperParams {
    pub fn new(c: f64, eps: f64, tau1: f64, tau2: f64, kernel: KernelSpec) -> Result<Self> {
        let hp = Self { c, eps, tau1, tau2, kernel };
        hp.validate()?;
        Ok(hp)
    }

    /// The standard eps-SVR, `(tau1, tau2) = (0, 1)`.
    pub fn eps_svr(c: f64, eps: f64, kernel: KernelSpec) -> Result<Self> {
        Self::new(c, eps, 0.0, 1.0, kernel)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.tau1 >= 0.0 && self.tau2 >= self.tau1 && self.tau2.is_finite()) {
            return Err(Error::invalid(format!(
                "need tau2 >= tau1 >= 0, got tau1={}, tau2={}",
                self.tau1, self.tau2
            )));
        }
        if self.tau2 <= 0.0 {
            return Err(Error::invalid("tau2 must be positive"));
        }
        self.kernel.validate()
    }

    pub fn is_eps_svr(&self) -> bool {
        self.tau1 == 0.0 && self.tau2 == 1.0
    }

    /// Lower end of the reduced box, `tau1 C`.
    pub fn lo(&self) -> f64 {
        self.tau1 * self.c
    }

    /// Upper end of the reduced box, `tau2 C`.
    pub fn hi(&self) -> f64 {
        self.tau2 * self.c
    }

    /// Threshold below which a coefficient counts as zero.
    pub fn zero_tol(&self) -> f64 {
        1e-8 * self.hi().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    #[default]
    None,
    MinMax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub max_iter: u64,
    pub scaling: Scaling,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: qp::DEFAULT_TOL,
            max_iter: qp::DEFAULT_MAX_ITER,
            scaling: Scaling::None,
        }
    }
}

/// Solver summary stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: u64,
    pub n_train: usize,
    pub sparsity_percent: f64,
    /// Set when `tau1 == tau2` forced the zero-coefficient model.
    #[serde(default)]
    pub degenerate: bool,
}

/// A trained regressor `f(x) = sum_i gamma_i K(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kernel: KernelSpec,
    pub params: HyperParams,
    /// Training-set indices of the stored support rows.
    pub support_indices: Vec<usize>,
    /// Training rows (after scaling, if any) with nonzero coefficient.
    pub support_points: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    /// Indices with `u1` strictly inside the box (upper tube edge).
    pub s1: Vec<usize>,
    /// Indices with `u2` strictly inside the box (lower tube edge).
    pub s2: Vec<usize>,
    pub scaling: Option<ScalingState>,
    pub diagnostics: Diagnostics,
}

/// Everything a fit produces, for callers that need more than the model.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: Model,
    pub solution: DualSolution,
    /// `f(x_i)` on the (scaled) training rows, computed with the full Gram matrix.
    pub train_outputs: Vec<f64>,
}

pub fn fit(data: &Dataset, hp: &HyperParams, opts: &FitOptions) -> Result<Model> {
    fit_report(data, hp, opts).map(|r| r.model)
}

pub fn fit_report(data: &Dataset, hp: &HyperParams, opts: &FitOptions) -> Result<FitReport> {
    hp.validate()?;
    if data.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 training samples, got {}", data.len())));
    }
    let scaling = match opts.scaling {
        Scaling::None => None,
        Scaling::MinMax => Some(fit_scaling(data)),
    };
    let features = match &scaling {
        Some(s) => s.transform(data.features())?,
        None => data.features().clone(),
    };
    let targets = data.targets();
    let l = data.len();

    if hp.tau1 == hp.tau2 {
        warn!("tau1 == tau2 = {}: the dual box collapses, returning the zero-coefficient model", hp.tau1);
        return Ok(degenerate_fit(targets, hp, scaling));
    }

    let g = gram(&hp.kernel, features.view());
    let problem = ReducedDual::new(g.view(), targets.view(), hp.eps, hp.lo(), hp.hi())?;
    let smo = SmoOptions {
        tol: opts.tol,
        max_iter: opts.max_iter,
        trace: false,
    };
    let (solution, _) = solve_smo(&problem, &smo)?;
    let gamma = solution.gamma();
    let bias = qp::bias(&problem, &solution.u1, &solution.u2);
    let f0 = problem.biasless_outputs(&gamma);
    let train_outputs: Vec<f64> = f0.iter().map(|v| v + bias).collect();

    let delta = problem.interior_margin();
    let interior = |u: f64| u > hp.lo() + delta && u < hp.hi() - delta;
    let s1 = (0..l).filter(|&i| interior(solution.u1[i])).collect();
    let s2 = (0..l).filter(|&i| interior(solution.u2[i])).collect();

    let zero_tol = hp.zero_tol();
    let support_indices: Vec<usize> = (0..l).filter(|&i| gamma[i].abs() > zero_tol).collect();
    let model = Model {
        kernel: hp.kernel,
        params: *hp,
        support_points: support_indices.iter().map(|&i| features.row(i).to_vec()).collect(),
        coefficients: support_indices.iter().map(|&i| gamma[i]).collect(),
        support_indices,
        bias,
        s1,
        s2,
        scaling,
        diagnostics: Diagnostics {
            objective: solution.objective,
            kkt_residual: solution.kkt_residual,
            iterations: solution.iterations,
            n_train: l,
            sparsity_percent: sparsity_percent(&solution, zero_tol),
            degenerate: false,
        },
    };
    Ok(FitReport {
        model,
        solution,
        train_outputs,
    })
}

/// With `tau1 == tau2` the two slack bounds coincide and the primal no longer
/// depends on the residuals, so `w = 0`. Any bias is optimal; the mean target
/// is used.
fn degenerate_fit(targets: &Array1<f64>, hp: &HyperParams, scaling: Option<ScalingState>) -> FitReport {
    let l = targets.len();
    let bias = targets.mean().unwrap_or(0.0);
    let u = vec![hp.lo(); l];
    let sum_u = 2.0 * l as f64 * hp.lo();
    let solution = DualSolution {
        u1: u.clone(),
        u2: u,
        objective: hp.eps * sum_u,
        kkt_residual: 0.0,
        iterations: 0,
    };
    FitReport {
        model: Model {
            kernel: hp.kernel,
            params: *hp,
            support_indices: Vec::new(),
            support_points: Vec::new(),
            coefficients: Vec::new(),
            bias,
            s1: Vec::new(),
            s2: Vec::new(),
            scaling,
            diagnostics: Diagnostics {
                objective: solution.objective,
                kkt_residual: 0.0,
                iterations: 0,
                n_train: l,
                sparsity_percent: 100.0,
                degenerate: true,
            },
        },
        solution,
        train_outputs: vec![bias; l],
    }
}

/// Bias for a solved dual on `data` (unscaled features).
pub fn compute_bias(solution: &DualSolution, data: &Dataset, hp: &HyperParams) -> Result<f64> {
    let g = gram(&hp.kernel, data.features().view());
    let problem = ReducedDual::new(g.view(), data.targets().view(), hp.eps, hp.lo(), hp.hi())?;
    if solution.len() != problem.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.len(),
            got: solution.len(),
        });
    }
    Ok(qp::bias(&problem, &solution.u1, &solution.u2))
}

/// Percentage of training points whose coefficient `gamma_i = u1_i - u2_i`
/// is zero up to `zero_tol`.
pub fn sparsity_percent(solution: &DualSolution, zero_tol: f64) -> f64 {
    sparsity_of(&solution.gamma(), zero_tol)
}

pub fn sparsity_of(gamma: &[f64], zero_tol: f64) -> f64 {
    if gamma.is_empty() {
        return 100.0;
    }
    let zeros = gamma.iter().filter(|g| g.abs() <= zero_tol).count();
    100.0 * zeros as f64 / gamma.len() as f64
}

impl Model {
    pub fn n_features(&self) -> Option<usize> {
        self.scaling
            .as_ref()
            .map(ScalingState::n_features)
            .or_else(|| self.support_points.first().map(Vec::len))
    }

    /// Predictions for each row of `features` (raw, unscaled units).
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        if let Some(n) = self.n_features() {
            if features.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: features.ncols(),
                });
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction features"));
        }
        let owned;
        let x = match &self.scaling {
            Some(s) => {
                owned = s.transform(&features.to_owned())?;
                owned.view()
            }
            None => features,
        };
        let support: Vec<Array1<f64>> = self.support_points.iter().map(|p| Array1::from_vec(p.clone())).collect();
        Ok(x.rows()
            .into_iter()
            .map(|row| {
                let mut acc = 0.0;
                for (sv, coef) in support.iter().zip(&self.coefficients) {
                    acc += coef * self.kernel.eval_unchecked(sv.view(), row);
                }
                acc + self.bias
            })
            .collect())
    }

    /// Dense coefficient vector over the training set (zeros off the support).
    pub fn training_gamma(&self) -> Vec<f64> {
        let mut gamma = vec![0.0; self.diagnostics.n_train];
        for (&i, &c) in self.support_indices.iter().zip(&self.coefficients) {
            gamma[i] = c;
        }
        gamma
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: Model = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        model.params.validate()?;
        if model.support_points.len() != model.coefficients.len() || model.support_indices.len() != model.coefficients.len() {
            return Err(Error::invalid("model file: support rows, indices and coefficients differ in length"));
        }
        Ok(model)
    }
}

/// Value of the primal problem with tight slacks,
/// `1/2 gamma' G gamma + C sum_i [rho(r_i - eps) + rho(-r_i - eps)]`
/// where `rho(t) = max(tau2 t, tau1 t)` and `r = y - G gamma - b`.
pub fn primal_objective(gram: ArrayView2<f64>, targets: &Array1<f64>, gamma: &[f64], bias: f64, hp: &HyperParams) -> f64 {
    let g = Array1::from_vec(gamma.to_vec());
    let f0 = gram.dot(&g);
    let rho = |t: f64| (hp.tau2 * t).max(hp.tau1 * t);
    let slack: f64 = targets
        .iter()
        .zip(f0.iter())
        .map(|(y, f)| {
            let r = y - f - bias;
            rho(r - hp.eps) + rho(-r - hp.eps)
        })
        .sum();
    0.5 * g.dot(&f0) + hp.c * slack
}

/// Which sparsity statement a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Proposition {
    /// `alpha1 beta1 != 0` or `alpha2 beta2 != 0` only on the tube boundary.
    BoundaryProducts,
    /// Inside the tube, `alpha1 beta2 = 0` and `alpha2 beta1 = 0`.
    CrossProducts,
    /// Inside the tube, the net coefficient vanishes.
    ZeroCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionViolation {
    pub index: usize,
    pub proposition: Proposition,
    pub residual: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub n_points: usize,
    pub n_inside: usize,
    pub violations: Vec<PropositionViolation>,
}

impl PropositionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the three sparsity propositions on a fitted model against its
/// training data. Points with `|y - f(x)| < eps - margin` count as inside the
/// tube; a point is on the boundary when `| |y - f(x)| - eps |` is within
/// `margin` plus the model's certified KKT residual.
pub fn verify_propositions(model: &Model, data: &Dataset, margin: f64) -> Result<PropositionReport> {
    let hp = &model.params;
    if hp.tau2 <= hp.tau1 {
        return Err(Error::invalid("proposition checks need tau2 > tau1"));
    }
    if data.len() != model.diagnostics.n_train {
        return Err(Error::DimensionMismatch {
            expected: model.diagnostics.n_train,
            got: data.len(),
        });
    }
    let outputs = model.predict(data.features().view())?;
    let residuals: Vec<f64> = data.targets().iter().zip(&outputs).map(|(y, f)| y - f).collect();
    Ok(check_propositions(
        &model.training_gamma(),
        &residuals,
        hp,
        margin,
        margin + model.diagnostics.kkt_residual,
    ))
}

/// Detector behind [`verify_propositions`], on explicit coefficient and
/// residual vectors. Multipliers are recovered with the minimal-sum split.
pub fn check_propositions(gamma: &[f64], residuals: &[f64], hp: &HyperParams, inside_margin: f64, boundary_tol: f64) -> PropositionReport {
    let (lo, zero_tol) = (hp.lo(), hp.zero_tol());
    let product_tol = zero_tol * hp.hi().max(1.0);
    let mut violations = Vec::new();
    let mut n_inside = 0;
    for (i, (&g, &r)) in gamma.iter().zip(residuals).enumerate() {
        let u1 = lo + g.max(0.0);
        let u2 = lo + (-g).max(0.0);
        let (a1, b1) = recover_multipliers(u1, hp.c, hp.tau1, hp.tau2);
        let (a2, b2) = recover_multipliers(u2, hp.c, hp.tau1, hp.tau2);
        let on_boundary = (r.abs() - hp.eps).abs() <= boundary_tol;
        let inside = r.abs() < hp.eps - inside_margin;

        for value in [a1 * b1, a2 * b2] {
            if value > product_tol && !on_boundary {
                violations.push(PropositionViolation {
                    index: i,
                    proposition: Proposition::BoundaryProducts,
                    residual: r,
                    value,
                });
            }
        }
        if inside {
            n_inside += 1;
            for value in [a1 * b2, a2 * b1] {
                if value > product_tol {
                    violations.push(PropositionViolation {
                        index: i,
                        proposition: Proposition::CrossProducts,
                        residual: r,
                        value,
                    });
                }
            }
            if g.abs() > zero_tol {
                violations.push(PropositionViolation {
                    index: i,
                    proposition: Proposition::ZeroCoefficient,
                    residual: r,
                    value: g,
                });
            }
        }
    }
    PropositionReport {
        n_points: gamma.len(),
        n_inside,
        violations,
    }
}
