//! Datasets, min-max feature scaling, CSV ingestion and seeded fold plans.
//!
//! All stochastic helpers in this crate draw from [`rng_from_seed`], a ChaCha8
//! stream keyed by a 64-bit seed, so results are reproducible bit-for-bit
//! across platforms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator behind every seeded operation in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A feature matrix (one sample per row) together with its response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array1<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: targets.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        Ok(Self { features, targets })
    }

    /// Builds a dataset from row slices; handy for small fixtures.
    pub fn from_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let features = Array2::from_shape_vec((rows.len(), n), flat)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(features, Array1::from_vec(targets.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
        }
    }
}

/// Per-feature extrema captured from a fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingState {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// Features with `max == min`; these map to 0.
    pub fn constant_features(&self) -> Vec<bool> {
        self.min.iter().zip(&self.max).map(|(lo, hi)| hi == lo).collect()
    }

    pub fn transform(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: features.ncols(),
            });
        }
        let mut out = features.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            let span = hi - lo;
            if span > 0.0 {
                col.mapv_inplace(|x| (x - lo) / span);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

pub fn fit_scaling(data: &Dataset) -> ScalingState {
    let n = data.n_features();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for row in data.features.rows() {
        for (j, &x) in row.iter().enumerate() {
            min[j] = min[j].min(x);
            max[j] = max[j].max(x);
        }
    }
    ScalingState { min, max }
}

/// Maps each feature into `[0, 1]` using `state`; targets are left untouched.
pub fn apply_scaling(data: &Dataset, state: &ScalingState) -> Result<Dataset> {
    Ok(Dataset {
        features: state.transform(&data.features)?,
        targets: data.targets.clone(),
    })
}

/// Reads a headerless or single-header CSV whose last column is the target.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let (rows, width, values) = read_numeric(path.as_ref(), has_header, 2)?;
    let mut flat = Vec::with_capacity(rows * (width - 1));
    let mut targets = Vec::with_capacity(rows);
    for row in values.chunks(width) {
        flat.extend_from_slice(&row[..width - 1]);
        targets.push(row[width - 1]);
    }
    let features = Array2::from_shape_vec((rows, width - 1), flat)
        .map_err(|e| Error::invalid(e.to_string()))?;
    Dataset::new(features, Array1::from_vec(targets))
}

/// Reads a CSV in which every column is a feature.
pub fn load_features_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Array2<f64>> {
    let (rows, width, values) = read_numeric(path.as_ref(), has_header, 1)?;
    Array2::from_shape_vec((rows, width), values).map_err(|e| Error::invalid(e.to_string()))
}

/// Row count, width and row-major values of a rectangular numeric CSV.
fn read_numeric(path: &Path, has_header: bool, min_width: usize) -> Result<(usize, usize, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let ingest = |column: usize, message: String| Error::Ingest {
            path: path.to_path_buf(),
            row,
            column,
            message,
        };
        match width {
            None if record.len() < min_width => {
                return Err(ingest(
                    record.len(),
                    format!("expected at least {min_width} columns, found {}", record.len()),
                ));
            }
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(ingest(
                    record.len().min(w) + 1,
                    format!("ragged row: expected {w} columns, found {}", record.len()),
                ));
            }
            Some(_) => {}
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field
                .parse()
                .map_err(|_| ingest(j + 1, format!("cannot parse {field:?} as a number")))?;
            if !value.is_finite() {
                return Err(ingest(j + 1, format!("non-finite value {field:?}")));
            }
            values.push(value);
        }
        rows += 1;
    }

    let Some(width) = width else {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    };
    Ok((rows, width, values))
}

/// Writes `x1,..,xn,y` with a header line. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (1..=data.n_features())
        .map(|j| format!("x{j}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (row, y) in data.features.rows().into_iter().zip(data.targets.iter()) {
        let mut line = String::new();
        for x in row {
            line.push_str(&format!("{x:?},"));
        }
        line.push_str(&format!("{y:?}"));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Assignment of sample indices to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl SplitPlan {
    /// Indices of the held-out samples for `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles `0..l` with the seeded generator and deals the permutation
/// round-robin into `k` folds.
pub fn make_folds(l: usize, k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("fold count must be at least 2, got {k}")));
    }
    if k > l {
        return Err(Error::invalid(format!("fold count {k} exceeds sample count {l}")));
    }
    let mut perm: Vec<usize> = (0..l).collect();
    perm.shuffle(&mut rng_from_seed(seed));
    let mut folds = vec![0; l];
    for (pos, &idx) in perm.iter().enumerate() {
        folds[idx] = pos % k;
    }
    Ok(SplitPlan { folds, k, seed })
}
