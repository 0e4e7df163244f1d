//! Cross-checks of the three dual solvers on random small instances.

use ndarray::{Array1, Array2};
use rand::Rng;
use rpsvr::data::rng_from_seed;
use rpsvr::kernel::{gram, KernelSpec};
use rpsvr::qp::{solve_full_oracle, solve_reference, solve_smo, OracleOptions, ReducedDual, ReferenceOptions, SmoOptions};

struct Instance {
    x: Array2<f64>,
    y: Array1<f64>,
    kernel: KernelSpec,
    eps: f64,
    c: f64,
    tau1: f64,
    tau2: f64,
}

fn instance(seed: u64) -> Instance {
    let mut rng = rng_from_seed(seed);
    let l = rng.random_range(2..=10);
    let d = rng.random_range(1..=3);
    let x = Array2::from_shape_fn((l, d), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(l, |_| rng.random_range(-1.0..1.0));
    let kernel = if rng.random_bool(0.5) {
        KernelSpec::Linear
    } else {
        KernelSpec::Rbf { q: rng.random_range(0.1..4.0) }
    };
    let tau1 = rng.random_range(0.05..1.0);
    Instance {
        x,
        y,
        kernel,
        eps: rng.random_range(0.01..0.3),
        c: rng.random_range(0.1..10.0),
        tau1,
        tau2: tau1 + rng.random_range(0.1..2.0),
    }
}

/// Primal weight seen through the training rows: `X' gamma` for the linear
/// kernel, `G gamma` otherwise. Both are unique even when `gamma` is not.
fn weights(inst: &Instance, g: &Array2<f64>, gamma: &[f64]) -> Vec<f64> {
    let gamma = Array1::from_vec(gamma.to_vec());
    match inst.kernel {
        KernelSpec::Linear => inst.x.t().dot(&gamma).to_vec(),
        KernelSpec::Rbf { .. } => g.dot(&gamma).to_vec(),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn three_solvers_agree() {
    for seed in 0..50 {
        let inst = instance(seed);
        let g = gram(&inst.kernel, inst.x.view());
        let p = ReducedDual::new(g.view(), inst.y.view(), inst.eps, inst.tau1 * inst.c, inst.tau2 * inst.c).unwrap();
        let (smo, _) = solve_smo(&p, &SmoOptions::default()).unwrap();
        let reference = solve_reference(&p, &ReferenceOptions::default()).unwrap();
        let full = solve_full_oracle(g.view(), inst.y.view(), inst.eps, inst.c, inst.tau1, inst.tau2, &OracleOptions::default()).unwrap();

        let obj = smo.objective;
        for (name, other) in [("reference", reference.objective), ("full", full.reduced.objective)] {
            assert!((obj - other).abs() <= 1e-5 * (1.0 + obj.abs()), "seed {seed}: smo {obj} vs {name} {other}");
        }
        let w = weights(&inst, &g, &smo.gamma());
        assert!(max_abs_diff(&w, &weights(&inst, &g, &reference.gamma())) <= 1e-4, "seed {seed}: reference w");
        assert!(max_abs_diff(&w, &weights(&inst, &g, &full.reduced.gamma())) <= 1e-4, "seed {seed}: full w");
    }
}

/// The full-variable oracle, which knows nothing about the reduced box,
/// lands on the plain eps-SVR optimum with cost `(tau2 - tau1) C`.
#[test]
fn full_oracle_matches_rescaled_eps_svr() {
    for seed in 100..150 {
        let inst = instance(seed);
        let g = gram(&inst.kernel, inst.x.view());
        let full = solve_full_oracle(g.view(), inst.y.view(), inst.eps, inst.c, inst.tau1, inst.tau2, &OracleOptions::default()).unwrap();
        let c_eff = (inst.tau2 - inst.tau1) * inst.c;
        let p = ReducedDual::new(g.view(), inst.y.view(), inst.eps, 0.0, c_eff).unwrap();
        let plain = solve_reference(&p, &ReferenceOptions::default()).unwrap();
        let diff = max_abs_diff(&weights(&inst, &g, &full.reduced.gamma()), &weights(&inst, &g, &plain.gamma()));
        assert!(diff <= 1e-4, "seed {seed}: {diff}");
        // Objectives differ exactly by the constant 2 l tau1 C eps.
        let shift = 2.0 * inst.y.len() as f64 * inst.tau1 * inst.c * inst.eps;
        let gap = (full.reduced.objective - plain.objective - shift).abs();
        assert!(gap <= 1e-5 * (1.0 + plain.objective.abs()), "seed {seed}: {gap}");
    }
}
