//! Cross-validated grid search, repeated benchmarks and curve tables.
//!
//! Every grid cell or repetition is an independent job; jobs run on a
//! bounded rayon pool and results are collected in input order, so output
//! files depend only on the configuration.

mod bench;
mod curves;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, make_folds, Dataset, SplitPlan};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::metrics::{evaluate, MetricReport};
use crate::svr::{fit, FitOptions, HyperParams, Scaling};
use crate::synth::{generate, SynthKind, SynthSpec};

pub use bench::{benchmark, write_bench_tables, BenchRow, BenchSpec, BenchTable};
pub use curves::{emit_curves, loss_curve, tau1_sweep, CurveKind, CurveTable, SweepMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Candidate values for every hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kernel: KernelKind,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub q: Vec<f64>,
    pub eps: Vec<f64>,
    pub tau1: Vec<f64>,
    pub tau2: Vec<f64>,
}

fn decimals(range: std::ops::RangeInclusive<i32>, denom: f64) -> Vec<f64> {
    range.map(|i| i as f64 / denom).collect()
}

impl Default for Grid {
    /// `C, q` in `{2^i : i = -10..=12}`; `eps` in
    /// `{0.05, 0.1, 0.2, .., 1, 1.5, 2, .., 5}`; `tau2` in `{0.5, 0.6, .., 2.5}`;
    /// `tau1` in `{0.1, 0.2, .., 1}`.
    fn default() -> Self {
        let powers: Vec<f64> = (-10..=12).map(|i| 2f64.powi(i)).collect();
        let mut eps = vec![0.05];
        eps.extend(decimals(1..=10, 10.0));
        eps.extend(decimals(3..=10, 2.0));
        Self {
            kernel: KernelKind::Rbf,
            c: powers.clone(),
            q: powers,
            eps,
            tau1: decimals(1..=10, 10.0),
            tau2: decimals(5..=25, 10.0),
        }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        let named = [("C", &self.c), ("eps", &self.eps), ("tau1", &self.tau1), ("tau2", &self.tau2)];
        for (name, values) in named {
            if values.is_empty() {
                return Err(Error::invalid(format!("grid for {name} is empty")));
            }
        }
        if self.kernel == KernelKind::Rbf && self.q.is_empty() {
            return Err(Error::invalid("grid for q is empty"));
        }
        if self.tau_pairs().is_empty() {
            return Err(Error::invalid("no (tau1, tau2) pair in the grid satisfies tau2 > tau1"));
        }
        Ok(())
    }

    fn kernels(&self) -> Vec<KernelSpec> {
        match self.kernel {
            KernelKind::Linear => vec![KernelSpec::Linear],
            KernelKind::Rbf => self.q.iter().map(|&q| KernelSpec::Rbf { q }).collect(),
        }
    }

    /// Valid `(tau1, tau2)` pairs, `tau2 > tau1 >= 0`.
    pub fn tau_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs = Vec::new();
        for &t2 in &self.tau2 {
            for &t1 in &self.tau1 {
                if t2 > t1 && t1 >= 0.0 {
                    pairs.push((t1, t2));
                }
            }
        }
        pairs
    }

    /// Every cell of the full product, tau pairs filtered.
    pub fn cells(&self) -> Result<Vec<HyperParams>> {
        self.product(&self.tau_pairs())
    }

    /// `(C, q, eps)` cells for plain eps-SVR.
    pub fn eps_svr_cells(&self) -> Result<Vec<HyperParams>> {
        self.product(&[(0.0, 1.0)])
    }

    fn product(&self, taus: &[(f64, f64)]) -> Result<Vec<HyperParams>> {
        let mut cells = Vec::new();
        for &c in &self.c {
            for kernel in self.kernels() {
                for &eps in &self.eps {
                    for &(t1, t2) in taus {
                        cells.push(HyperParams::new(c, eps, t1, t2, kernel)?);
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Training/test inputs for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DataSource {
    Synth {
        kind: SynthKind,
        #[serde(default)]
        n_train: Option<usize>,
        #[serde(default)]
        n_test: Option<usize>,
    },
    Csv {
        train: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default = "default_true")]
        has_header: bool,
    },
}

fn default_true() -> bool {
    true
}

impl DataSource {
    pub fn label(&self) -> String {
        match self {
            DataSource::Synth { kind, .. } => kind.to_string(),
            DataSource::Csv { train, .. } => train
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, DataSource::Synth { .. })
    }

    /// Synthetic sets are used as generated; CSV features are min-max scaled.
    pub fn default_scaling(&self) -> Scaling {
        if self.is_synthetic() {
            Scaling::None
        } else {
            Scaling::MinMax
        }
    }

    pub fn synth_spec(&self, seed: u64) -> Option<SynthSpec> {
        match *self {
            DataSource::Synth { kind, n_train, n_test } => {
                let mut spec = SynthSpec::new(kind, seed);
                spec.n_train = n_train.unwrap_or(spec.n_train);
                spec.n_test = n_test.unwrap_or(spec.n_test);
                Some(spec)
            }
            DataSource::Csv { .. } => None,
        }
    }

    /// Train and optional test split for one seed.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
        match self {
            DataSource::Synth { .. } => {
                let d = generate(&self.synth_spec(seed).expect("synthetic source"))?;
                Ok((d.train, Some(d.test)))
            }
            DataSource::Csv { train, test, has_header } => {
                let tr = load_csv(train, *has_header)?;
                let te = test.as_ref().map(|p| load_csv(p, *has_header)).transpose()?;
                Ok((tr, te))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub grid: Grid,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub scaling: Option<Scaling>,
    pub tol: f64,
    pub max_iter: u64,
    /// Tune `(C, q, eps)` with eps-SVR first, then only the tau pair.
    pub two_stage: bool,
    pub bench: Option<BenchSpec>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fit = FitOptions::default();
        Self {
            source: DataSource::Synth {
                kind: SynthKind::Type1,
                n_train: None,
                n_test: None,
            },
            grid: Grid::default(),
            folds: 10,
            repeats: 10,
            seed: 0,
            workers: None,
            scaling: None,
            tol: fit.tol,
            max_iter: fit.max_iter,
            two_stage: true,
            bench: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.folds < 2 {
            return Err(Error::invalid(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            scaling: self.scaling.unwrap_or_else(|| self.source.default_scaling()),
        }
    }
}

/// Runs `f` on a pool with at most `workers` threads (all cores if `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Sample mean and standard deviation (`n - 1` denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Stat { mean, std, n })
    }
}

/// Mean and spread of each criterion over folds or repetitions. Undefined
/// ratios are left out of their average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub rmse: Stat,
    pub mae: Stat,
    pub sse_sst: Option<Stat>,
    pub ssr_sst: Option<Stat>,
    pub sparsity_percent: Option<Stat>,
}

impl Aggregate {
    pub fn of(reports: &[MetricReport]) -> Result<Self> {
        let pick = |f: &dyn Fn(&MetricReport) -> Option<f64>| -> Vec<f64> { reports.iter().filter_map(f).collect() };
        let rmse = Stat::of(&pick(&|m| Some(m.rmse))).ok_or_else(|| Error::invalid("no metric reports to aggregate"))?;
        Ok(Self {
            rmse,
            mae: Stat::of(&pick(&|m| Some(m.mae))).expect("same length as rmse"),
            sse_sst: Stat::of(&pick(&|m| m.sse_sst)),
            ssr_sst: Stat::of(&pick(&|m| m.ssr_sst)),
            sparsity_percent: Stat::of(&pick(&|m| m.sparsity_percent)),
        })
    }
}

/// Outcome of one hyperparameter cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: HyperParams,
    pub folds: Vec<MetricReport>,
    pub aggregate: Aggregate,
    /// Wall-clock training time summed over folds.
    pub seconds: f64,
}

impl RunRecord {
    pub fn new(params: HyperParams, folds: Vec<MetricReport>, seconds: f64) -> Result<Self> {
        let aggregate = Aggregate::of(&folds)?;
        Ok(Self {
            params,
            folds,
            aggregate,
            seconds,
        })
    }

    /// Recomputes the aggregate from the per-fold entries.
    pub fn check(&self) -> Result<()> {
        if Aggregate::of(&self.folds)? != self.aggregate {
            return Err(Error::invalid(format!("run record for {:?}: aggregate does not match its folds", self.params)));
        }
        Ok(())
    }

    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
        let records: Vec<RunRecord> = serde_json::from_str(&fs::read_to_string(path)?)?;
        for r in &records {
            r.check()?;
        }
        Ok(records)
    }
}

/// Selection order: lower mean RMSE, then smaller `C`, `q`, `eps`, `tau2`, `tau1`.
pub fn selection_key(r: &RunRecord) -> [f64; 6] {
    let p = &r.params;
    let q = match p.kernel {
        KernelSpec::Linear => 0.0,
        KernelSpec::Rbf { q } => q,
    };
    [r.aggregate.rmse.mean, p.c, q, p.eps, p.tau2, p.tau1]
}

fn compare_keys(a: &[f64; 6], b: &[f64; 6]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Picks the best record under [`selection_key`].
pub fn select_best(records: &[RunRecord]) -> Option<&RunRecord> {
    records.iter().min_by(|a, b| compare_keys(&selection_key(a), &selection_key(b)))
}

/// A cell whose solver failed on at least one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub params: HyperParams,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: RunRecord,
    pub table: Vec<RunRecord>,
    pub failures: Vec<CellFailure>,
}

/// k-fold cross-validation of one cell.
pub fn cross_validate(data: &Dataset, hp: &HyperParams, plan: &SplitPlan, opts: &FitOptions) -> Result<RunRecord> {
    let mut folds = Vec::with_capacity(plan.k);
    let mut seconds = 0.0;
    for f in 0..plan.k {
        let train = data.select(&plan.train_indices(f));
        let test = data.select(&plan.test_indices(f));
        let start = Instant::now();
        let model = fit(&train, hp, opts)?;
        seconds += start.elapsed().as_secs_f64();
        let pred = model.predict(test.features().view())?;
        let report = evaluate(test.targets().as_slice().expect("contiguous"), &pred)?;
        folds.push(report.with_sparsity(model.diagnostics.sparsity_percent));
    }
    RunRecord::new(*hp, folds, seconds)
}

/// Evaluates every cell by cross-validation over `plan` and returns the
/// best one. Failing cells are skipped and listed.
pub fn grid_search(data: &Dataset, cells: &[HyperParams], plan: &SplitPlan, opts: &FitOptions) -> Result<GridResult> {
    if cells.is_empty() {
        return Err(Error::invalid("grid search needs at least one cell"));
    }
    if plan.folds.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: plan.folds.len(),
        });
    }
    let outcomes: Vec<Result<RunRecord>> = cells.par_iter().map(|hp| cross_validate(data, hp, plan, opts)).collect();
    let mut table = Vec::new();
    let mut failures = Vec::new();
    for (hp, outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(r) => table.push(r),
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => failures.push(CellFailure {
                params: *hp,
                error: e.to_string(),
            }),
        }
    }
    if !failures.is_empty() {
        warn!("{} of {} grid cells failed and were skipped", failures.len(), cells.len());
    }
    let best = select_best(&table)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("all {} grid cells failed", cells.len())))?;
    Ok(GridResult { best, table, failures })
}

/// Both stages of the tuning protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub stage1: GridResult,
    pub stage2: GridResult,
}

impl TwoStageResult {
    pub fn best(&self) -> &RunRecord {
        &self.stage2.best
    }
}

/// Tunes `(C, q, eps)` for eps-SVR, then freezes them and tunes only the tau
/// pair. Stage two never refits eps-SVR.
pub fn two_stage_search(data: &Dataset, grid: &Grid, plan: &SplitPlan, opts: &FitOptions) -> Result<TwoStageResult> {
    grid.validate()?;
    let stage1 = grid_search(data, &grid.eps_svr_cells()?, plan, opts)?;
    let frozen = stage1.best.params;
    info!("stage one chose C={}, kernel={}, eps={}", frozen.c, frozen.kernel, frozen.eps);
    let cells: Vec<HyperParams> = grid
        .tau_pairs()
        .into_iter()
        .filter(|&(t1, t2)| !(t1 == 0.0 && t2 == 1.0))
        .map(|(t1, t2)| HyperParams::new(frozen.c, frozen.eps, t1, t2, frozen.kernel))
        .collect::<Result<_>>()?;
    let stage2 = grid_search(data, &cells, plan, opts)?;
    Ok(TwoStageResult { stage1, stage2 })
}

/// What `gridsearch` produces for a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub dataset: String,
    pub stage1: Option<GridResult>,
    pub result: GridResult,
    /// Metrics of the selected cell refit on the full training set and
    /// scored on the test split, when there is one.
    pub test: Option<MetricReport>,
}

pub fn run_search(cfg: &ExperimentConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let (train, test) = cfg.source.load(cfg.seed)?;
    let plan = make_folds(train.len(), cfg.folds, cfg.seed)?;
    let opts = cfg.fit_options();
    with_workers(cfg.workers, || {
        let (stage1, result) = if cfg.two_stage {
            let r = two_stage_search(&train, &cfg.grid, &plan, &opts)?;
            (Some(r.stage1), r.stage2)
        } else {
            (None, grid_search(&train, &cfg.grid.cells()?, &plan, &opts)?)
        };
        let test = match &test {
            Some(t) => {
                let model = fit(&train, &result.best.params, &opts)?;
                let pred = model.predict(t.features().view())?;
                let report = evaluate(t.targets().as_slice().expect("contiguous"), &pred)?;
                Some(report.with_sparsity(model.diagnostics.sparsity_percent))
            }
            None => None,
        };
        Ok(SearchReport {
            dataset: cfg.source.label(),
            stage1,
            result,
            test,
        })
    })?
}

/// Columns shared by the search and benchmark CSV files.
pub(crate) fn params_columns(p: &HyperParams) -> [String; 6] {
    let (kernel, q) = match p.kernel {
        KernelSpec::Linear => ("linear", String::new()),
        KernelSpec::Rbf { q } => ("rbf", format!("{q:?}")),
    };
    [
        kernel.to_string(),
        q,
        format!("{:?}", p.c),
        format!("{:?}", p.eps),
        format!("{:?}", p.tau1),
        format!("{:?}", p.tau2),
    ]
}

pub(crate) fn stat_columns(s: Option<Stat>) -> [String; 2] {
    match s {
        Some(s) => [format!("{:?}", s.mean), format!("{:?}", s.std)],
        None => [String::new(), String::new()],
    }
}

const SEARCH_HEADER: &str = "stage,kernel,q,C,eps,tau1,tau2,rmse_mean,rmse_std,mae_mean,mae_std,sse_sst_mean,sse_sst_std,ssr_sst_mean,ssr_sst_std,sparsity_mean,sparsity_std,selected";

fn search_rows(stage: &str, g: &GridResult, out: &mut String) {
    for r in &g.table {
        let a = &r.aggregate;
        let mut cols = vec![stage.to_string()];
        cols.extend(params_columns(&r.params));
        for s in [Some(a.rmse), Some(a.mae), a.sse_sst, a.ssr_sst, a.sparsity_percent] {
            cols.extend(stat_columns(s));
        }
        cols.push(((r.params == g.best.params) as u8).to_string());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
}

/// Writes `search.csv` (one row per cell, no timings), `search.json` and,
/// when any cell failed, `failures.json` under `dir`.
pub fn write_search_report(report: &SearchReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut csv = String::from(SEARCH_HEADER);
    csv.push('\n');
    if let Some(s1) = &report.stage1 {
        search_rows("1", s1, &mut csv);
    }
    search_rows(if report.stage1.is_some() { "2" } else { "1" }, &report.result, &mut csv);
    let csv_path = dir.join("search.csv");
    fs::write(&csv_path, csv)?;
    let json_path = dir.join("search.json");
    fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    let mut paths = vec![csv_path, json_path];
    let failures: Vec<&CellFailure> = report
        .stage1
        .iter()
        .flat_map(|s| &s.failures)
        .chain(&report.result.failures)
        .collect();
    if !failures.is_empty() {
        let p = dir.join("failures.json");
        fs::write(&p, serde_json::to_string_pretty(&failures)? + "\n")?;
        paths.push(p);
    }
    Ok(paths)
}

/// Frozen `(q, C, eps)` and the tau pairs `(tau2, tau1)` reported for each
/// artificial dataset, first pair being the headline one.
pub fn reference_settings(kind: SynthKind) -> Option<(f64, f64, f64, Vec<(f64, f64)>)> {
    let s = match kind {
        SynthKind::Type1 => (4.0, 0.5, 0.1, vec![(2.0, 0.5), (2.0, 0.6), (2.0, 0.4)]),
        SynthKind::Type2 => (4.0, 1.0, 0.2, vec![(1.0, 0.1), (1.0, 0.2), (1.2, 0.1)]),
        SynthKind::Type3 => (4.0, 2.0, 0.3, vec![(1.0, 0.2), (1.0, 0.3), (2.0, 1.2)]),
        SynthKind::Type4 => (4.0, 0.5, 0.1, vec![(1.5, 0.3), (1.5, 0.2), (1.5, 0.1)]),
        SynthKind::Type5 => (4.0, 0.5, 0.2, vec![(1.2, 0.2), (1.1, 0.2), (1.0, 0.2)]),
        SynthKind::Type6 => (4.0, 0.125, 0.2, vec![(1.4, 0.1), (1.3, 0.1), (1.2, 0.1)]),
        SynthKind::Type7 => (2.0, 32.0, 0.2, vec![(0.5, 0.3), (0.5, 0.2), (1.2, 0.1)]),
        SynthKind::Type8 => (2.0, 32.0, 0.3, vec![(0.8, 0.3), (0.7, 0.3), (0.6, 0.3)]),
        SynthKind::LinearOutlier => return None,
    };
    Some(s)
}
