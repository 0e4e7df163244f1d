use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use rpsvr::data::{load_csv, load_features_csv};
use rpsvr::harness::{
    benchmark, emit_curves, run_search, tau1_sweep, write_bench_tables, write_search_report, CurveKind, DataSource, ExperimentConfig,
    SweepMetric,
};
use rpsvr::kernel::KernelSpec;
use rpsvr::loss::LossParams;
use rpsvr::metrics::evaluate;
use rpsvr::svr::{fit as fit_model, FitOptions, HyperParams, Model, Scaling};
use rpsvr::synth::{write_pair, NormalParam, SynthKind, SynthSpec};

use crate::{Common, CurveArg, KernelArg, MetricArg, ModelArgs, NormalArg, ScaleArg};

/// 2 for bad input, 3 for solver failures, 1 for anything unexpected.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<rpsvr::Error>()) {
        Some(rpsvr::Error::NotConverged { .. }) => 3,
        Some(_) => 2,
        None if e.chain().any(|c| c.is::<std::io::Error>()) => 2,
        None => 1,
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    rpsvr::Error::invalid(msg).into()
}

fn out_path(common: &Common, name: &Path) -> Result<PathBuf> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(common.out.join(name))
}

fn kernel_spec(kind: KernelArg, q: f64) -> KernelSpec {
    match kind {
        KernelArg::Linear => KernelSpec::Linear,
        KernelArg::Rbf => KernelSpec::Rbf { q },
    }
}

fn fit_options(common: &Common, scale: ScaleArg) -> FitOptions {
    FitOptions {
        tol: common.tol,
        max_iter: common.max_iter,
        scaling: match scale {
            ScaleArg::None => Scaling::None,
            ScaleArg::Minmax => Scaling::MinMax,
        },
    }
}

pub fn gen(kind: &str, n_train: Option<usize>, n_test: Option<usize>, normal: Option<NormalArg>, stem: Option<String>, common: &Common) -> Result<()> {
    let kind: SynthKind = kind.parse()?;
    let mut spec = SynthSpec::new(kind, common.seed);
    spec.n_train = n_train.unwrap_or(spec.n_train);
    spec.n_test = n_test.unwrap_or(spec.n_test);
    if let Some(n) = normal {
        spec.normal_param = match n {
            NormalArg::Std => NormalParam::StdDev,
            NormalArg::Variance => NormalParam::Variance,
        };
    }
    let stem = stem.unwrap_or_else(|| kind.to_string());
    let paths = write_pair(&spec, &common.out, &stem)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn fit(train: &Path, has_header: bool, m: &ModelArgs, scale: ScaleArg, model_file: &Path, common: &Common) -> Result<()> {
    let data = load_csv(train, has_header)?;
    let hp = HyperParams::new(m.c, m.eps, m.tau1, m.tau2, kernel_spec(m.kernel, m.q))?;
    let model = fit_model(&data, &hp, &fit_options(common, scale))?;
    let path = out_path(common, model_file)?;
    model.save(&path).with_context(|| format!("writing {}", path.display()))?;
    info!("model written to {}", path.display());
    let d = &model.diagnostics;
    println!(
        "{}",
        serde_json::json!({
            "model": path,
            "bias": model.bias,
            "support_vectors": model.coefficients.len(),
            "sparsity_percent": d.sparsity_percent,
            "kkt_residual": d.kkt_residual,
            "iterations": d.iterations,
            "objective": d.objective,
        })
    );
    Ok(())
}

pub fn predict(model: &Path, data: &Path, has_header: bool, features_only: bool, pred_file: &Path, common: &Common) -> Result<()> {
    let model = Model::load(model).with_context(|| format!("reading model {}", model.display()))?;
    let features = if features_only {
        load_features_csv(data, has_header)?
    } else {
        load_csv(data, has_header)?.features().clone()
    };
    let pred = model.predict(features.view())?;
    let path = out_path(common, pred_file)?;
    let mut text = String::from("index,prediction\n");
    for (i, p) in pred.iter().enumerate() {
        text.push_str(&format!("{i},{p:?}\n"));
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("{}", path.display());
    Ok(())
}

pub fn eval(truth: &Path, pred: &Path, has_header: bool, report_file: Option<&Path>, common: &Common) -> Result<()> {
    let y = load_csv(truth, has_header)?;
    let p = load_csv(pred, has_header)?;
    let report = evaluate(y.targets().as_slice().expect("contiguous"), p.targets().as_slice().expect("contiguous"))?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(name) = report_file {
        let path = out_path(common, name)?;
        fs::write(&path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{json}");
    Ok(())
}

/// Config from file, else built from flags; common flags override.
fn experiment(config: Option<&Path>, kind: Option<&str>, train: Option<PathBuf>, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    match (kind, train) {
        (Some(_), Some(_)) => bail!(invalid("give either --kind or --train, not both")),
        (Some(k), None) => {
            cfg.source = DataSource::Synth {
                kind: k.parse()?,
                n_train: None,
                n_test: None,
            }
        }
        (None, Some(t)) => {
            cfg.source = DataSource::Csv {
                train: t,
                test: None,
                has_header: true,
            }
        }
        (None, None) if config.is_none() => bail!(invalid("need --config, --kind or --train")),
        (None, None) => {}
    }
    if config.is_none() {
        cfg.seed = common.seed;
        cfg.tol = common.tol;
        cfg.max_iter = common.max_iter;
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    Ok(cfg)
}

pub fn gridsearch(config: Option<&Path>, kind: Option<&str>, train: Option<PathBuf>, folds: Option<usize>, single_stage: bool, common: &Common) -> Result<()> {
    let mut cfg = experiment(config, kind, train, common)?;
    if let Some(k) = folds {
        cfg.folds = k;
    }
    if single_stage {
        cfg.two_stage = false;
    }
    cfg.validate()?;
    let report = run_search(&cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| common.out.clone());
    let paths = write_search_report(&report, &dir)?;
    let best = &report.result.best;
    println!(
        "{}",
        serde_json::json!({
            "dataset": report.dataset,
            "best": best.params,
            "cv_rmse_mean": best.aggregate.rmse.mean,
            "test": report.test,
            "failures": report.result.failures.len() + report.stage1.as_ref().map_or(0, |s| s.failures.len()),
            "files": paths,
        })
    );
    Ok(())
}

pub fn bench(config: Option<&Path>, kind: Option<&str>, train: Option<PathBuf>, repeats: Option<usize>, common: &Common) -> Result<()> {
    let mut cfg = experiment(config, kind, train, common)?;
    if let Some(r) = repeats {
        cfg.repeats = r;
    }
    cfg.validate()?;
    let table = benchmark(&cfg)?;
    let dir = cfg.out.clone().unwrap_or_else(|| common.out.clone());
    let paths = write_bench_tables(&table, &dir)?;
    print!("{}", fs::read_to_string(&paths[1])?);
    Ok(())
}

pub struct CurveRequest {
    pub kind: CurveArg,
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
    pub eps: Vec<f64>,
    pub range: (f64, f64),
    pub step: f64,
    pub allow_nonconvex: bool,
    pub dataset: String,
    pub kernel: KernelArg,
    pub q: f64,
    pub c: f64,
    pub metric: MetricArg,
    pub curve_file: PathBuf,
}

/// Broadcasts single values so every list has `n` entries.
fn spread(name: &str, values: &[f64], n: usize) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => bail!(invalid(format!("--{name} has {len} values, expected 1 or {n}"))),
    }
}

pub fn curves(r: &CurveRequest, common: &Common) -> Result<()> {
    let path = out_path(common, &r.curve_file)?;
    if r.kind == CurveArg::Tau1Sweep {
        let kind: SynthKind = r.dataset.parse()?;
        let data = rpsvr::synth::generate(&SynthSpec::new(kind, common.seed))?;
        let hp = HyperParams::new(r.c, r.eps[0], 0.0, r.tau2[0], kernel_spec(r.kernel, r.q))?;
        let metric = match r.metric {
            MetricArg::SseSst => SweepMetric::SseSst,
            MetricArg::SsrSst => SweepMetric::SsrSst,
            MetricArg::Rmse => SweepMetric::Rmse,
            MetricArg::Mae => SweepMetric::Mae,
            MetricArg::Sparsity => SweepMetric::Sparsity,
        };
        let table = tau1_sweep(&data.train, &data.test, &hp, &r.tau1, metric, &fit_options(common, ScaleArg::None))?;
        table.write_csv(&path)?;
    } else {
        let n = r.tau1.len().max(r.tau2.len()).max(r.eps.len());
        let (t1, t2, eps) = (spread("tau1", &r.tau1, n)?, spread("tau2", &r.tau2, n)?, spread("eps", &r.eps, n)?);
        let params: Vec<LossParams> = (0..n).map(|i| LossParams::allow_nonconvex(t1[i], t2[i], eps[i])).collect();
        let kind = match r.kind {
            CurveArg::Loss => CurveKind::Loss,
            CurveArg::Influence => CurveKind::Influence,
            CurveArg::Density => CurveKind::Density,
            CurveArg::Tau1Sweep => unreachable!("handled above"),
        };
        emit_curves(kind, &params, r.range, r.step, r.allow_nonconvex, &path)?;
    }
    println!("{}", path.display());
    Ok(())
}
