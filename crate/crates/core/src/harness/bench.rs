//! Repeated-run comparison of eps-SVR against RP-eps-SVR at frozen
//! `(q, C, eps)`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{params_columns, reference_settings, stat_columns, with_workers, Aggregate, DataSource, ExperimentConfig, KernelKind, Stat};
use crate::data::{make_folds, Dataset};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::metrics::{evaluate, MetricReport};
use crate::svr::{fit, FitOptions, HyperParams};

/// Models compared in one benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub kernel: KernelKind,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub eps: f64,
    /// `(tau2, tau1)` pairs, in table order.
    pub tau_pairs: Vec<(f64, f64)>,
    #[serde(default = "super::default_true")]
    pub include_eps_svr: bool,
}

impl BenchSpec {
    /// Settings reported for a synthetic dataset, if any.
    pub fn reference(source: &DataSource) -> Option<Self> {
        let DataSource::Synth { kind, .. } = source else {
            return None;
        };
        let (q, c, eps, tau_pairs) = reference_settings(*kind)?;
        Some(Self {
            kernel: KernelKind::Rbf,
            q: Some(q),
            c,
            eps,
            tau_pairs,
            include_eps_svr: true,
        })
    }

    fn kernel_spec(&self) -> Result<KernelSpec> {
        match self.kernel {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::Rbf => KernelSpec::rbf(self.q.ok_or_else(|| Error::invalid("rbf benchmark needs q"))?),
        }
    }

    /// Hyperparameters for each table row.
    pub fn models(&self) -> Result<Vec<HyperParams>> {
        let kernel = self.kernel_spec()?;
        let mut out = Vec::new();
        if self.include_eps_svr {
            out.push(HyperParams::eps_svr(self.c, self.eps, kernel)?);
        }
        for &(t2, t1) in &self.tau_pairs {
            out.push(HyperParams::new(self.c, self.eps, t1, t2, kernel)?);
        }
        if out.is_empty() {
            return Err(Error::invalid("benchmark has no models"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub params: HyperParams,
    /// One report per repetition (synthetic) or fold (CSV).
    pub runs: Vec<MetricReport>,
    pub aggregate: Aggregate,
    pub seconds: Stat,
}

impl BenchRow {
    pub fn check(&self) -> Result<()> {
        if Aggregate::of(&self.runs)? != self.aggregate {
            return Err(Error::invalid(format!("bench row {}: aggregate does not match its runs", self.model)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub dataset: String,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let t: BenchTable = serde_json::from_str(&fs::read_to_string(path)?)?;
        for r in &t.rows {
            r.check()?;
        }
        Ok(t)
    }
}

fn model_label(p: &HyperParams) -> &'static str {
    if p.is_eps_svr() {
        "eps-SVR"
    } else {
        "RP-eps-SVR"
    }
}

/// Fits every model on `train` and scores it on `test`.
fn run_models(train: &Dataset, test: &Dataset, models: &[HyperParams], opts: &FitOptions) -> Result<Vec<(MetricReport, f64)>> {
    models
        .iter()
        .map(|hp| {
            let start = Instant::now();
            let model = fit(train, hp, opts)?;
            let secs = start.elapsed().as_secs_f64();
            let pred = model.predict(test.features().view())?;
            let report = evaluate(test.targets().as_slice().expect("contiguous"), &pred)?;
            Ok((report.with_sparsity(model.diagnostics.sparsity_percent), secs))
        })
        .collect()
}

/// Synthetic sources: `repeats` fresh draws with seeds `seed, seed + 1, ..`,
/// every model sharing each draw. CSV sources: `folds`-fold cross-validation
/// of the training file.
pub fn benchmark(cfg: &ExperimentConfig) -> Result<BenchTable> {
    cfg.validate()?;
    let spec = match &cfg.bench {
        Some(s) => s.clone(),
        None => BenchSpec::reference(&cfg.source)
            .ok_or_else(|| Error::invalid("no benchmark settings given and none known for this dataset"))?,
    };
    let models = spec.models()?;
    let opts = cfg.fit_options();

    let per_run: Vec<Vec<(MetricReport, f64)>> = with_workers(cfg.workers, || -> Result<_> {
        if cfg.source.is_synthetic() {
            (0..cfg.repeats as u64)
                .into_par_iter()
                .map(|r| {
                    let (train, test) = cfg.source.load(cfg.seed.wrapping_add(r))?;
                    run_models(&train, &test.expect("synthetic sources have a test split"), &models, &opts)
                })
                .collect()
        } else {
            let (data, _) = cfg.source.load(cfg.seed)?;
            let plan = make_folds(data.len(), cfg.folds, cfg.seed)?;
            (0..plan.k)
                .into_par_iter()
                .map(|f| {
                    let train = data.select(&plan.train_indices(f));
                    let test = data.select(&plan.test_indices(f));
                    run_models(&train, &test, &models, &opts)
                })
                .collect()
        }
    })??;

    let rows = models
        .iter()
        .enumerate()
        .map(|(m, hp)| {
            let runs: Vec<MetricReport> = per_run.iter().map(|r| r[m].0.clone()).collect();
            let secs: Vec<f64> = per_run.iter().map(|r| r[m].1).collect();
            Ok(BenchRow {
                model: model_label(hp).to_string(),
                params: *hp,
                aggregate: Aggregate::of(&runs)?,
                runs,
                seconds: Stat::of(&secs).expect("at least one run"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchTable {
        dataset: cfg.source.label(),
        rows,
    })
}

const BENCH_HEADER: &str = "dataset,model,kernel,q,C,eps,tau1,tau2,sse_sst_mean,sse_sst_std,ssr_sst_mean,ssr_sst_std,rmse_mean,rmse_std,mae_mean,mae_std,sparsity_mean,sparsity_std,runs";

fn pm(s: Option<Stat>) -> String {
    s.map(|s| format!("{:.4} ± {:.4}", s.mean, s.std)).unwrap_or_else(|| "undefined".into())
}

/// Aligned plain-text rendering, one line per model, timings included.
pub fn render_text(table: &BenchTable) -> String {
    let header = [
        "model", "tau2,tau1", "SSE/SST", "SSR/SST", "RMSE", "MAE", "Sparsity%", "(q,C,eps)", "time(s)",
    ];
    let mut lines: Vec<[String; 9]> = vec![header.map(String::from)];
    for r in &table.rows {
        let p = &r.params;
        let q = match p.kernel {
            KernelSpec::Linear => "-".to_string(),
            KernelSpec::Rbf { q } => q.to_string(),
        };
        let taus = if p.is_eps_svr() { "-".to_string() } else { format!("{},{}", p.tau2, p.tau1) };
        let a = &r.aggregate;
        lines.push([
            r.model.clone(),
            taus,
            pm(a.sse_sst),
            pm(a.ssr_sst),
            pm(Some(a.rmse)),
            pm(Some(a.mae)),
            a.sparsity_percent.map(|s| format!("{:.1}", s.mean)).unwrap_or_default(),
            format!("({},{},{})", q, p.c, p.eps),
            format!("{:.3}", r.seconds.mean),
        ]);
    }
    let widths: Vec<usize> = (0..9).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = format!("{}\n", table.dataset);
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

/// Writes `bench.csv` (no timings, reproducible byte for byte),
/// `bench.txt` and `bench.json` under `dir`.
pub fn write_bench_tables(table: &BenchTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for r in &table.rows {
        let a = &r.aggregate;
        let mut cols = vec![table.dataset.clone(), r.model.clone()];
        cols.extend(params_columns(&r.params));
        for s in [a.sse_sst, a.ssr_sst, Some(a.rmse), Some(a.mae), a.sparsity_percent] {
            cols.extend(stat_columns(s));
        }
        cols.push(r.runs.len().to_string());
        csv.push_str(&cols.join(","));
        csv.push('\n');
    }
    let paths = [dir.join("bench.csv"), dir.join("bench.txt"), dir.join("bench.json")];
    fs::write(&paths[0], csv)?;
    fs::write(&paths[1], render_text(table))?;
    fs::write(&paths[2], serde_json::to_string_pretty(table)? + "\n")?;
    Ok(paths.to_vec())
}
