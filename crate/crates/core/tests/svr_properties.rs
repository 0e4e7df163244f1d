//! End-to-end properties of fitted models.

mod common;

use rand::Rng;
use rpsvr::data::{rng_from_seed, Dataset};
use rpsvr::kernel::{gram, KernelSpec};
use rpsvr::svr::{fit, fit_report, primal_objective, FitOptions, HyperParams, Model, Scaling};
use rpsvr::synth::{generate, SynthKind, SynthSpec};

use common::direct_eps_svr;

fn random_data(seed: u64, l: usize) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..l).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let y: Vec<f64> = rows.iter().map(|r| (2.0 * r[0]).sin() + 0.5 * r[1] + rng.random_range(-0.2..0.2)).collect();
    Dataset::from_rows(&rows, &y).unwrap()
}

#[test]
fn eps_svr_matches_direct_dual() {
    let tight = FitOptions { tol: 1e-12, ..Default::default() };
    for seed in 0..5 {
        let d = random_data(seed, 30);
        let hp = HyperParams::eps_svr(2.0, 0.1, KernelSpec::Rbf { q: 0.5 }).unwrap();
        let m = fit(&d, &hp, &tight).unwrap();
        let direct = direct_eps_svr(&gram(&hp.kernel, d.features().view()), d.targets(), hp.c, hp.eps);
        let gap = m.training_gamma().iter().zip(&direct.gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8, "seed {seed}: gamma gap {gap}");
        assert!((m.bias - direct.bias).abs() <= 1e-8, "seed {seed}: b {} vs {}", m.bias, direct.bias);
    }
}

/// Strong duality: the primal objective at (w, b) equals minus the reduced
/// dual objective.
#[test]
fn primal_dual_gap_closes() {
    let opts = FitOptions { tol: 1e-10, ..Default::default() };
    for (tau1, tau2) in [(0.0, 1.0), (0.3, 1.0), (0.5, 2.0)] {
        let d = random_data(7, 40);
        let hp = HyperParams::new(1.5, 0.1, tau1, tau2, KernelSpec::Rbf { q: 1.0 }).unwrap();
        let r = fit_report(&d, &hp, &opts).unwrap();
        let g = gram(&hp.kernel, d.features().view());
        let primal = primal_objective(g.view(), d.targets(), &r.solution.gamma(), r.model.bias, &hp);
        let dual = r.model.diagnostics.objective;
        assert!((primal + dual).abs() <= 1e-7 * (1.0 + primal.abs()), "tau=({tau1},{tau2}): primal {primal} dual {dual}");
    }
}

/// Points pinned to the tube edges by interior multipliers sit exactly at
/// residual +eps (S1) or -eps (S2) under the recovered bias.
#[test]
fn bias_consistent_with_tube_edges() {
    let d = generate(&SynthSpec::new(SynthKind::Type2, 4)).unwrap().train;
    let hp = HyperParams::new(1.0, 0.2, 0.1, 1.0, KernelSpec::Rbf { q: 4.0 }).unwrap();
    let m = fit(&d, &hp, &FitOptions { tol: 1e-10, ..Default::default() }).unwrap();
    assert!(!m.s1.is_empty() || !m.s2.is_empty());
    let f = m.predict(d.features().view()).unwrap();
    for &i in &m.s1 {
        assert!((d.targets()[i] - f[i] - hp.eps).abs() <= 1e-7, "S1 point {i}");
    }
    for &i in &m.s2 {
        assert!((d.targets()[i] - f[i] + hp.eps).abs() <= 1e-7, "S2 point {i}");
    }
}

#[test]
fn save_load_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = random_data(3, 50);
    for scaling in [Scaling::None, Scaling::MinMax] {
        let hp = HyperParams::new(0.7, 0.05, 0.2, 1.3, KernelSpec::Rbf { q: 0.8 }).unwrap();
        let m = fit(&data, &hp, &FitOptions { scaling, ..Default::default() }).unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back, m);
        let probe = random_data(99, 20);
        let (a, b) = (m.predict(probe.features().view()).unwrap(), back.predict(probe.features().view()).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn constant_targets_give_flat_model() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
    let d = Dataset::from_rows(&rows, &[2.5; 10]).unwrap();
    let hp = HyperParams::new(1.0, 0.3, 0.2, 1.0, KernelSpec::Rbf { q: 1.0 }).unwrap();
    let m = fit(&d, &hp, &FitOptions::default()).unwrap();
    assert!(m.coefficients.is_empty());
    assert_eq!(m.diagnostics.sparsity_percent, 100.0);
    assert!((m.bias - 2.5).abs() < 1e-12);
}

#[test]
fn equal_taus_fall_back_to_mean() {
    let d = random_data(5, 20);
    let hp = HyperParams::new(1.0, 0.1, 0.8, 0.8, KernelSpec::Linear).unwrap();
    let m = fit(&d, &hp, &FitOptions::default()).unwrap();
    assert!(m.diagnostics.degenerate);
    let mean = d.targets().iter().sum::<f64>() / d.len() as f64;
    assert!((m.bias - mean).abs() < 1e-12);
    assert!(m.predict(d.features().view()).unwrap().iter().all(|p| (p - mean).abs() < 1e-12));
}

#[test]
fn wrong_feature_count_is_rejected() {
    let d = random_data(1, 10);
    let m = fit(&d, &HyperParams::eps_svr(1.0, 0.1, KernelSpec::Linear).unwrap(), &FitOptions::default()).unwrap();
    let bad = ndarray::Array2::<f64>::zeros((3, 5));
    assert!(m.predict(bad.view()).unwrap_err().is_validation());
    let nan = ndarray::Array2::from_elem((1, 2), f64::NAN);
    assert!(m.predict(nan.view()).is_err());
}
