//! Regression error criteria on a test set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub sse: f64,
    pub sst: f64,
    pub ssr: f64,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when `sst == 0`.
    pub sse_sst: Option<f64>,
    /// `None` when `sst == 0`.
    pub ssr_sst: Option<f64>,
    pub sparsity_percent: Option<f64>,
}

impl MetricReport {
    pub fn ratios_defined(&self) -> bool {
        self.sse_sst.is_some()
    }

    pub fn with_sparsity(mut self, sparsity_percent: f64) -> Self {
        self.sparsity_percent = Some(sparsity_percent);
        self
    }

    pub const CSV_HEADER: &'static str = "k,sse,sst,ssr,rmse,mae,sse_sst,ssr_sst,sparsity_percent";

    /// One CSV row matching [`Self::CSV_HEADER`]; undefined ratios and a
    /// missing sparsity are written as empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{},{},{}",
            self.k,
            self.sse,
            self.sst,
            self.ssr,
            self.rmse,
            self.mae,
            opt(self.sse_sst),
            opt(self.ssr_sst),
            opt(self.sparsity_percent)
        )
    }
}

/// SSE, SST, SSR, RMSE, MAE and the two normalized ratios. The mean is
/// taken over `y_true`.
pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<MetricReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let k = y_true.len();
    if k == 0 {
        return Err(Error::invalid("cannot evaluate an empty prediction set"));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets or predictions"));
    }
    let n = k as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let mut sse = 0.0;
    let mut sst = 0.0;
    let mut ssr = 0.0;
    let mut abs = 0.0;
    for (&y, &p) in y_true.iter().zip(y_pred) {
        sse += (y - p) * (y - p);
        sst += (y - mean) * (y - mean);
        ssr += (p - mean) * (p - mean);
        abs += (y - p).abs();
    }
    let ratio = |num: f64| if sst > 0.0 { Some(num / sst) } else { None };
    Ok(MetricReport {
        k,
        sse,
        sst,
        ssr,
        rmse: (sse / n).sqrt(),
        mae: abs / n,
        sse_sst: ratio(sse),
        ssr_sst: ratio(ssr),
        sparsity_percent: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_fit() {
        let m = evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.sse, m.rmse, m.mae), (0.0, 0.0, 0.0));
        assert_eq!(m.sse_sst, Some(0.0));
    }

    #[test]
    fn two_point_arithmetic() {
        let m = evaluate(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!((m.sse, m.sst, m.ssr, m.rmse, m.mae), (2.0, 2.0, 0.0, 1.0, 1.0));
        assert_eq!(m.sse_sst, Some(1.0));
        assert_eq!(m.ssr_sst, Some(0.0));
    }

    #[test]
    fn constant_truth_flags_ratios() {
        let m = evaluate(&[5.0, 5.0], &[4.0, 7.0]).unwrap();
        assert_eq!(m.sst, 0.0);
        assert!(!m.ratios_defined());
        assert_eq!(m.ssr_sst, None);
        assert!(m.csv_row().contains(",,"));
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[1.0], &[1.0, 2.0]).is_err());
        assert!(evaluate(&[], &[]).is_err());
        assert!(evaluate(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn json_and_csv_row() {
        let m = evaluate(&[0.0, 2.0], &[1.0, 1.0]).unwrap().with_sparsity(40.0);
        let back: MetricReport = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.csv_row(), "2,2.0,2.0,0.0,1.0,1.0,1.0,0.0,40.0");
        assert_eq!(MetricReport::CSV_HEADER.split(',').count(), m.csv_row().split(',').count());
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|k| {
            (
                proptest::collection::vec(-100.0f64..100.0, k),
                proptest::collection::vec(-100.0f64..100.0, k),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_squared_times_k_is_sse((y, p) in paired()) {
            let m = evaluate(&y, &p).unwrap();
            let back = m.rmse * m.rmse * m.k as f64;
            prop_assert!((back - m.sse).abs() <= 1e-9 * m.sse.max(1e-300));
        }

        #[test]
        fn mae_below_rmse((y, p) in paired()) {
            let m = evaluate(&y, &p).unwrap();
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
        }

        #[test]
        fn shift_invariance((y, p) in paired(), c in -1000.0f64..1000.0) {
            // Integer-valued data keeps the shifted arithmetic exact.
            let y: Vec<f64> = y.iter().map(|v| v.round()).collect();
            let p: Vec<f64> = p.iter().map(|v| v.round()).collect();
            let c = c.round();
            let a = evaluate(&y, &p).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v + c).collect();
            let b = evaluate(&ys, &ps).unwrap();
            prop_assert_eq!(a.sse, b.sse);
            prop_assert_eq!(a.rmse, b.rmse);
            prop_assert_eq!(a.mae, b.mae);
        }

        #[test]
        fn normalized_error_scale_invariant((y, p) in paired(), a in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0]) {
            let m = evaluate(&y, &p).unwrap();
            prop_assume!(m.sst > 1e-6);
            let ys: Vec<f64> = y.iter().map(|v| a * v).collect();
            let ps: Vec<f64> = p.iter().map(|v| a * v).collect();
            let s = evaluate(&ys, &ps).unwrap();
            let (r0, r1) = (m.sse_sst.unwrap(), s.sse_sst.unwrap());
            prop_assert!((r0 - r1).abs() <= 1e-12 * r0.abs().max(1.0));
        }
    }
}
