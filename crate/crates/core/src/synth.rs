//! Seeded generators for the one-dimensional benchmark datasets.
//!
//! Types 1-6 perturb `sin(x)/x`, types 7-8 a kinked sine, and
//! `linear_outlier` is the line `y = 2x + 3` with five gross outliers.
//! Only training targets carry noise; test targets are the clean function.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{rng_from_seed, write_csv, Dataset};
use crate::error::{Error, Result};

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Type1,
    Type2,
    Type3,
    Type4,
    Type5,
    Type6,
    Type7,
    Type8,
    LinearOutlier,
}

impl SynthKind {
    pub const ALL: [SynthKind; 9] = [
        SynthKind::Type1,
        SynthKind::Type2,
        SynthKind::Type3,
        SynthKind::Type4,
        SynthKind::Type5,
        SynthKind::Type6,
        SynthKind::Type7,
        SynthKind::Type8,
        SynthKind::LinearOutlier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Type1 => "type1",
            SynthKind::Type2 => "type2",
            SynthKind::Type3 => "type3",
            SynthKind::Type4 => "type4",
            SynthKind::Type5 => "type5",
            SynthKind::Type6 => "type6",
            SynthKind::Type7 => "type7",
            SynthKind::Type8 => "type8",
            SynthKind::LinearOutlier => "linear_outlier",
        }
    }

    /// Noise-free response.
    pub fn clean(self, x: f64) -> f64 {
        match self {
            SynthKind::Type7 | SynthKind::Type8 => {
                let s = (x - 1.0) / 4.0;
                s.abs() + (PI * (1.0 + s)).sin().abs() + 1.0
            }
            SynthKind::LinearOutlier => 2.0 * x + 3.0,
            _ => sinc(x),
        }
    }

    pub fn noise(self) -> Noise {
        match self {
            SynthKind::Type1 => Noise::Uniform(0.2),
            SynthKind::Type2 => Noise::Uniform(0.3),
            SynthKind::Type3 => Noise::Uniform(0.4),
            SynthKind::Type4 => Noise::Normal(0.1),
            SynthKind::Type5 => Noise::Normal(0.3),
            SynthKind::Type6 => Noise::Normal(0.4),
            SynthKind::Type7 => Noise::Uniform(0.4),
            SynthKind::Type8 => Noise::Uniform(0.6),
            SynthKind::LinearOutlier => Noise::Normal(10.0),
        }
    }

    /// How the second argument of a normal noise law is read by default.
    pub fn default_normal_param(self) -> NormalParam {
        match self {
            SynthKind::LinearOutlier => NormalParam::Variance,
            _ => NormalParam::StdDev,
        }
    }

    /// `(n_train, n_test)` used when a spec leaves them unset.
    pub fn default_sizes(self) -> (usize, usize) {
        match self {
            SynthKind::LinearOutlier => (300, 300),
            _ => (100, 500),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        SynthKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown dataset kind '{s}' (expected type1..type8 or linear_outlier)")))
    }
}

/// Additive training noise. `Uniform(a)` is `U[-a, a]`; `Normal(s)` is a
/// zero-mean normal whose parameter is read per [`NormalParam`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    Uniform(f64),
    Normal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalParam {
    StdDev,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub normal_param: NormalParam,
}

/// Number of training responses replaced by outliers in `linear_outlier`.
pub const N_OUTLIERS: usize = 5;

impl SynthSpec {
    pub fn new(kind: SynthKind, seed: u64) -> Self {
        let (n_train, n_test) = kind.default_sizes();
        Self {
            kind,
            n_train,
            n_test,
            seed,
            normal_param: kind.default_normal_param(),
        }
    }

    pub fn with_sizes(mut self, n_train: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_test = n_test;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::invalid("n_train and n_test must be at least 1"));
        }
        if self.kind == SynthKind::LinearOutlier && self.n_train < N_OUTLIERS {
            return Err(Error::invalid(format!("linear_outlier needs at least {N_OUTLIERS} training points")));
        }
        Ok(())
    }

    /// Standard deviation actually used for a normal noise law.
    pub fn normal_sigma(&self, param: f64) -> f64 {
        match self.normal_param {
            NormalParam::StdDev => param,
            NormalParam::Variance => param.sqrt(),
        }
    }
}

/// A generated train/test pair plus the bookkeeping tests need.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub train: Dataset,
    pub test: Dataset,
    /// Training-set indices whose responses were replaced by outliers.
    pub outliers: Vec<usize>,
    /// Training responses before outlier injection.
    pub train_before_outliers: Vec<f64>,
}

/// Draws `x ~ U[-4 pi, 4 pi)` for the training rows, then their noise, then
/// outliers (if any), then the test rows. The stream is fully determined by
/// the seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let range = 4.0 * PI;
    let xs = Uniform::new(-range, range).map_err(|e| Error::invalid(e.to_string()))?;
    let kind = spec.kind;

    let x_train: Vec<f64> = (0..spec.n_train).map(|_| xs.sample(&mut rng)).collect();
    let mut y_train: Vec<f64> = match kind.noise() {
        Noise::Uniform(a) => {
            let d = Uniform::new_inclusive(-a, a).map_err(|e| Error::invalid(e.to_string()))?;
            x_train.iter().map(|&x| kind.clean(x) + d.sample(&mut rng)).collect()
        }
        Noise::Normal(p) => {
            let d = Normal::new(0.0, spec.normal_sigma(p)).map_err(|e| Error::invalid(e.to_string()))?;
            x_train.iter().map(|&x| kind.clean(x) + d.sample(&mut rng)).collect()
        }
    };
    let before = y_train.clone();
    let mut outliers = Vec::new();
    if kind == SynthKind::LinearOutlier {
        // Inputs are i.i.d., so the first rows are as random as any others.
        for (i, y) in y_train.iter_mut().enumerate().take(N_OUTLIERS) {
            *y += rng.random_range(-50.0..=-25.0);
            outliers.push(i);
        }
    }
    let x_test: Vec<f64> = (0..spec.n_test).map(|_| xs.sample(&mut rng)).collect();
    let y_test: Vec<f64> = x_test.iter().map(|&x| kind.clean(x)).collect();

    Ok(SynthData {
        train: column_dataset(x_train, y_train)?,
        test: column_dataset(x_test, y_test)?,
        outliers,
        train_before_outliers: before,
    })
}

fn column_dataset(x: Vec<f64>, y: Vec<f64>) -> Result<Dataset> {
    let n = x.len();
    let features = Array2::from_shape_vec((n, 1), x).map_err(|e| Error::invalid(e.to_string()))?;
    Dataset::new(features, Array1::from_vec(y))
}

pub fn write_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(data, path)
}

/// Sidecar describing a generated pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SynthSpec,
    pub train_file: String,
    pub test_file: String,
    pub outlier_rows: Vec<usize>,
}

/// Writes `<stem>_train.csv`, `<stem>_test.csv` and `<stem>_manifest.json`
/// into `dir` and returns the three paths.
pub fn write_pair(spec: &SynthSpec, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 3]> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let data = generate(spec)?;
    let train = dir.join(format!("{stem}_train.csv"));
    let test = dir.join(format!("{stem}_test.csv"));
    let manifest_path = dir.join(format!("{stem}_manifest.json"));
    write_dataset(&data.train, &train)?;
    write_dataset(&data.test, &test)?;
    let file_name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = Manifest {
        spec: *spec,
        train_file: file_name(&train),
        test_file: file_name(&test),
        outlier_rows: data.outliers,
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok([train, test, manifest_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(PI).abs() < 1e-15);
        assert!((sinc(PI / 2.0) - 2.0 / PI).abs() < 1e-15);
        assert!((sinc(1e-13) - 1.0).abs() < 1e-20);
    }

    #[test]
    fn kinked_sine_at_one() {
        // sin(pi) is ~1.2e-16 in floating point, one ulp above 1 after the sum.
        assert!((SynthKind::Type7.clean(1.0) - 1.0).abs() < 1e-15);
        assert!((SynthKind::Type8.clean(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("TYPE3".parse::<SynthKind>().unwrap(), SynthKind::Type3);
        assert_eq!("linear-outlier".parse::<SynthKind>().unwrap(), SynthKind::LinearOutlier);
        assert!("type9".parse::<SynthKind>().is_err());
        for k in SynthKind::ALL {
            assert_eq!(k.name().parse::<SynthKind>().unwrap(), k);
        }
    }

    #[test]
    fn defaults() {
        let s = SynthSpec::new(SynthKind::Type1, 0);
        assert_eq!((s.n_train, s.n_test), (100, 500));
        let s = SynthSpec::new(SynthKind::LinearOutlier, 0);
        assert_eq!((s.n_train, s.n_test), (300, 300));
        assert_eq!(s.normal_param, NormalParam::Variance);
        assert!((s.normal_sigma(10.0) - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(SynthSpec::new(SynthKind::Type5, 0).normal_sigma(0.3), 0.3);
        assert!(SynthSpec::new(SynthKind::Type1, 0).with_sizes(0, 5).validate().is_err());
    }

    #[test]
    fn uniform_noise_bounded_and_centered() {
        for (kind, a) in [(SynthKind::Type1, 0.2), (SynthKind::Type2, 0.3), (SynthKind::Type3, 0.4), (SynthKind::Type7, 0.4), (SynthKind::Type8, 0.6)] {
            let d = generate(&SynthSpec::new(kind, 11)).unwrap();
            let noise: Vec<f64> = d
                .train
                .features()
                .column(0)
                .iter()
                .zip(d.train.targets())
                .map(|(&x, &y)| y - kind.clean(x))
                .collect();
            assert!(noise.iter().all(|e| e.abs() <= a), "{kind}");
            let mean = noise.iter().sum::<f64>() / noise.len() as f64;
            assert!(mean.abs() <= 4.0 * a / (noise.len() as f64).sqrt(), "{kind}: {mean}");
        }
    }

    #[test]
    fn normal_noise_spread() {
        for (kind, sigma) in [(SynthKind::Type4, 0.1), (SynthKind::Type5, 0.3), (SynthKind::Type6, 0.4)] {
            let mut pooled = Vec::new();
            for seed in 0..10 {
                let d = generate(&SynthSpec::new(kind, seed)).unwrap();
                for (&x, &y) in d.train.features().column(0).iter().zip(d.train.targets()) {
                    pooled.push(y - kind.clean(x));
                }
            }
            let n = pooled.len() as f64;
            let mean = pooled.iter().sum::<f64>() / n;
            let sd = (pooled.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((sd / sigma - 1.0).abs() < 0.2, "{kind}: sd {sd}");
        }
    }

    #[test]
    fn test_split_is_clean() {
        for kind in SynthKind::ALL {
            let d = generate(&SynthSpec::new(kind, 3)).unwrap();
            for (&x, &y) in d.test.features().column(0).iter().zip(d.test.targets()) {
                assert_eq!(y, kind.clean(x));
            }
            assert!(d.train.features().iter().chain(d.test.features().iter()).all(|x| (-4.0 * PI..4.0 * PI).contains(x)));
        }
    }

    #[test]
    fn outliers_injected() {
        let d = generate(&SynthSpec::new(SynthKind::LinearOutlier, 5)).unwrap();
        assert_eq!(d.train.len(), 300);
        assert_eq!(d.test.len(), 300);
        assert_eq!(d.outliers, vec![0, 1, 2, 3, 4]);
        for (i, (&after, &before)) in d.train.targets().iter().zip(&d.train_before_outliers).enumerate() {
            let shift = after - before;
            if i < N_OUTLIERS {
                assert!((-50.0..=-25.0).contains(&shift), "{shift}");
            } else {
                assert_eq!(shift, 0.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::new(SynthKind::Type6, 99);
        let (a, b) = (generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = generate(&SynthSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn csv_round_trip_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::new(SynthKind::Type1, 1);
        let [train, test, manifest] = write_pair(&spec, dir.path(), "t1").unwrap();
        let d = generate(&spec).unwrap();
        assert_eq!(load_csv(&train, true).unwrap(), d.train);
        assert_eq!(load_csv(&test, true).unwrap(), d.test);
        let m: Manifest = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
        assert_eq!(m.spec, spec);
        assert_eq!(m.train_file, "t1_train.csv");
    }

    #[test]
    fn empty_dataset_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        let d = Dataset::new(Array2::zeros((0, 1)), Array1::zeros(0)).unwrap();
        write_dataset(&d, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "x1,y\n");
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let d = generate(&SynthSpec::new(SynthKind::Type1, 1)).unwrap();
        let err = write_dataset(&d.train, "/nonexistent-dir/x.csv").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }
}
