//! Tabulated curves: loss, influence and density over a residual range, and
//! a test metric against `tau1` at fixed `tau2`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{influence, rp_density, rp_loss, LossParams};
use crate::metrics::evaluate;
use crate::svr::{fit, FitOptions, HyperParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Loss,
    Influence,
    Density,
    Tau1Sweep,
}

impl std::str::FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loss" => Ok(CurveKind::Loss),
            "influence" => Ok(CurveKind::Influence),
            "density" => Ok(CurveKind::Density),
            "tau1_sweep" | "tau1-sweep" => Ok(CurveKind::Tau1Sweep),
            other => Err(Error::invalid(format!("unknown curve kind '{other}'"))),
        }
    }
}

/// Named columns of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        if let Some(parent) = path.as_ref().parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Points `lo, lo + step, ..` up to `hi` (inclusive, within rounding).
fn grid_points(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::invalid(format!("need finite lo <= hi and step > 0, got [{lo}, {hi}] step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(Error::invalid("curve would have more than 10^7 points"));
    }
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

fn label(p: &LossParams) -> String {
    format!("tau2={} tau1={} eps={}", p.tau2, p.tau1, p.eps)
}

/// Loss, influence or density for each parameterization over `[lo, hi]`.
/// Parameters outside the convex regime are refused unless
/// `allow_nonconvex` is set, and are never accepted for densities.
pub fn loss_curve(kind: CurveKind, params: &[LossParams], lo: f64, hi: f64, step: f64, allow_nonconvex: bool) -> Result<CurveTable> {
    if params.is_empty() {
        return Err(Error::invalid("at least one loss parameterization is required"));
    }
    for p in params {
        if let Err(e) = p.validate() {
            if !allow_nonconvex || kind == CurveKind::Density {
                return Err(e);
            }
            if ![p.tau1, p.tau2, p.eps].iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("loss parameters"));
            }
        }
    }
    let xs = grid_points(lo, hi, step)?;
    let mut header = vec!["u".to_string()];
    header.extend(params.iter().map(label));
    let rows = xs
        .iter()
        .map(|&u| {
            let mut row = vec![u];
            for p in params {
                row.push(match kind {
                    CurveKind::Loss => rp_loss(u, p),
                    CurveKind::Influence => influence(u, p),
                    CurveKind::Density => rp_density(u, p)?,
                    CurveKind::Tau1Sweep => return Err(Error::invalid("tau1 sweeps need training data, use tau1_sweep")),
                });
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(CurveTable { header, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMetric {
    SseSst,
    SsrSst,
    Rmse,
    Mae,
    Sparsity,
}

impl std::str::FromStr for SweepMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sse_sst" => Ok(SweepMetric::SseSst),
            "ssr_sst" => Ok(SweepMetric::SsrSst),
            "rmse" => Ok(SweepMetric::Rmse),
            "mae" => Ok(SweepMetric::Mae),
            "sparsity" => Ok(SweepMetric::Sparsity),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

/// Retrains at each `tau1` (keeping `base`'s other parameters) and reports
/// the chosen test metric. Values of `tau1 >= tau2` are skipped; undefined
/// ratios come out as NaN.
pub fn tau1_sweep(train: &Dataset, test: &Dataset, base: &HyperParams, tau1s: &[f64], metric: SweepMetric, opts: &FitOptions) -> Result<CurveTable> {
    let mut rows = Vec::new();
    for &t1 in tau1s {
        if t1 >= base.tau2 {
            continue;
        }
        let hp = HyperParams { tau1: t1, ..*base };
        let model = fit(train, &hp, opts)?;
        let pred = model.predict(test.features().view())?;
        let m = evaluate(test.targets().as_slice().expect("contiguous"), &pred)?;
        let v = match metric {
            SweepMetric::SseSst => m.sse_sst.unwrap_or(f64::NAN),
            SweepMetric::SsrSst => m.ssr_sst.unwrap_or(f64::NAN),
            SweepMetric::Rmse => m.rmse,
            SweepMetric::Mae => m.mae,
            SweepMetric::Sparsity => model.diagnostics.sparsity_percent,
        };
        rows.push(vec![t1, v]);
    }
    if rows.is_empty() {
        return Err(Error::invalid("no tau1 value below tau2"));
    }
    let name = serde_json::to_value(metric)?.as_str().unwrap_or("metric").to_string();
    Ok(CurveTable {
        header: vec!["tau1".into(), name],
        rows,
    })
}

/// Pointwise curves by kind; `tau1_sweep` goes through [`tau1_sweep`].
pub fn emit_curves(kind: CurveKind, params: &[LossParams], range: (f64, f64), step: f64, allow_nonconvex: bool, out: impl AsRef<Path>) -> Result<CurveTable> {
    let table = loss_curve(kind, params, range.0, range.1, step, allow_nonconvex)?;
    table.write_csv(out)?;
    Ok(table)
}
