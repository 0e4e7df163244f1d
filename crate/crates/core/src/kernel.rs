//! Linear and Gaussian (RBF) kernels and dense Gram matrices.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel choice. The RBF width `q` enters as `exp(-||x - z||^2 / q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { q: f64 },
}

impl KernelSpec {
    pub fn rbf(q: f64) -> Result<Self> {
        let k = KernelSpec::Rbf { q };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { q } if q > 0.0 && q.is_finite() => Ok(()),
            KernelSpec::Rbf { q } => Err(Error::invalid(format!("RBF width q must be positive, got {q}"))),
        }
    }

    /// Evaluates the kernel; the caller guarantees equal lengths.
    #[inline]
    pub fn eval_unchecked(&self, x: ArrayView1<f64>, z: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Linear => x.dot(&z),
            KernelSpec::Rbf { q } => {
                let d2: f64 = x.iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / q).exp()
            }
        }
    }

    pub fn eval(&self, x: ArrayView1<f64>, z: ArrayView1<f64>) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: z.len(),
            });
        }
        Ok(self.eval_unchecked(x, z))
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Rbf { q } => write!(f, "rbf(q={q})"),
        }
    }
}

/// Full `l x l` Gram matrix of the rows of `features`.
///
/// Only the upper triangle is evaluated; the lower triangle is a mirror, so
/// the result is exactly symmetric.
pub fn gram(spec: &KernelSpec, features: ArrayView2<f64>) -> Array2<f64> {
    let l = features.nrows();
    let upper: Vec<Vec<f64>> = (0..l)
        .into_par_iter()
        .map(|i| {
            let xi = features.row(i);
            (i..l).map(|j| spec.eval_unchecked(xi, features.row(j))).collect()
        })
        .collect();
    let mut g = Array2::zeros((l, l));
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

/// Kernel values between every row of `a` and every row of `b` (`a.nrows() x b.nrows()`).
pub fn cross_gram(spec: &KernelSpec, a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    Ok(Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        spec.eval_unchecked(a.row(i), b.row(j))
    }))
}
