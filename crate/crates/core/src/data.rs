//! Datasets: CSV ingestion, record splitting and synthetic generation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, NarxModel, SignalSeries};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("cannot parse `{value}` in column `{column}` at row {row}")]
    Parse { row: usize, column: String, value: String },
    #[error("non-finite sample at row {row}")]
    NonFiniteSample { row: usize },
    #[error("input and output lengths differ ({u} vs {y})")]
    LengthMismatch { u: usize, y: usize },
    #[error("dataset is empty")]
    Empty,
    #[error("no record {record} (have {count})")]
    UnknownRecord { record: usize, count: usize },
    #[error("range {start}..{end} is out of bounds for record {record} of length {len}")]
    RangeOutOfBounds { record: usize, start: usize, end: usize, len: usize },
    #[error("estimation and validation overlap in record {record}")]
    Overlap { record: usize },
    #[error("generator diverged at sample {0}")]
    Diverged(usize),
    #[error("noise standard deviation must be finite and non-negative")]
    BadNoise,
    #[error("input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Paired input/output record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub name: String,
    pub u: SignalSeries<T>,
    pub y: SignalSeries<T>,
    /// Hz; metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<f64>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, u: Vec<T>, y: Vec<T>) -> Result<Self, DataError> {
        if u.len() != y.len() {
            return Err(DataError::LengthMismatch { u: u.len(), y: y.len() });
        }
        if u.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            name: name.into(),
            u: SignalSeries::new(u)?,
            y: SignalSeries::new(y)?,
            sample_rate: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, DataError> {
        if start >= end || end > self.len() {
            return Err(DataError::RangeOutOfBounds { record: 0, start, end, len: self.len() });
        }
        Ok(Self {
            name: format!("{}[{start}..{end}]", self.name),
            u: SignalSeries::with_start(self.u.samples()[start..end].to_vec(), start)?,
            y: SignalSeries::with_start(self.y.samples()[start..end].to_vec(), start)?,
            sample_rate: self.sample_rate,
        })
    }
}

/// Reads columns `u_name` and `y_name` from a headed CSV file. Row numbers
/// in errors count data rows from 0.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, columns: (&str, &str)) -> Result<Dataset<T>, DataError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DataError::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Csv(e.to_string()))?;
    let headers = reader.headers().map_err(|e| DataError::Csv(e.to_string()))?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let (ui, yi) = (find(columns.0)?, find(columns.1)?);
    let (mut u, mut y) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        for (idx, name, out) in [(ui, columns.0, &mut u), (yi, columns.1, &mut y)] {
            let cell = rec.get(idx).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                row,
                column: name.to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteSample { row });
            }
            out.push(T::from_f64_lossy(v));
        }
    }
    let name = path.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, u, y)
}

/// Writes `u,y` columns with shortest round-trip formatting.
pub fn write_csv<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| DataError::Csv(e.to_string()))?;
    w.write_record(["u", "y"]).map_err(|e| DataError::Csv(e.to_string()))?;
    for (u, y) in d.u.samples().iter().zip(d.y.samples()) {
        w.write_record([u.to_string(), y.to_string()]).map_err(|e| DataError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Runs `generator` forward with additive Gaussian noise of standard
/// deviation `noise_std`. The first `max_lag` outputs are noise only.
pub fn synthesize<T: Scalar>(
    generator: &NarxModel<T>,
    u: &SignalSeries<T>,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset<T>, DataError> {
    let noise = Normal::new(0.0, noise_std).map_err(|_| DataError::BadNoise)?;
    if !noise_std.is_finite() {
        return Err(DataError::BadNoise);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lag = generator.max_lag();
    let us = u.samples();
    let mut y: Vec<T> = Vec::with_capacity(us.len());
    for k in 0..us.len() {
        let xi = T::from_f64_lossy(noise.sample(&mut rng));
        let v = if k < lag {
            xi
        } else {
            generator
                .expression()
                .terms()
                .iter()
                .zip(generator.parameters())
                .map(|(t, &c)| {
                    c * t.factors().iter().fold(T::one(), |acc, f| {
                        let s = match f.signal {
                            crate::narx::Signal::Input => us[k - f.delay],
                            crate::narx::Signal::Output => y[k - f.delay],
                        };
                        acc * s.powi(f.exponent as i32)
                    })
                })
                .sum::<T>()
                + xi
        };
        if !v.is_finite() {
            return Err(DataError::Diverged(k));
        }
        y.push(v);
    }
    Dataset::new("synthetic", us.to_vec(), y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    /// Gaussian white noise, optionally low-pass filtered.
    Gaussian,
    /// Random-phase multisine with equal amplitudes.
    Multisine,
}

/// Excitation signal description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub kind: InputKind,
    /// Peak absolute value of the generated signal.
    pub amplitude: f64,
    pub length: usize,
    pub seed: u64,
    /// Fraction of the Nyquist band that is excited, in `(0, 1]`.
    #[serde(default = "full_band")]
    pub bandwidth: f64,
}

fn full_band() -> f64 {
    1.0
}

impl InputSpec {
    pub fn generate<T: Scalar>(&self) -> Result<SignalSeries<T>, DataError> {
        if self.length == 0 {
            return Err(DataError::BadInput("length must be positive".into()));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth <= 1.0) {
            return Err(DataError::BadInput("bandwidth must be in (0, 1]".into()));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(DataError::BadInput("amplitude must be finite and non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.length;
        let raw: Vec<f64> = match self.kind {
            InputKind::Gaussian => {
                let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                if self.bandwidth >= 1.0 {
                    white
                } else {
                    // Two cascaded one-pole low-pass sections.
                    let a = (-PI * self.bandwidth).exp();
                    let mut out = white;
                    for _ in 0..2 {
                        let mut s = 0.0;
                        for x in out.iter_mut() {
                            s = a * s + (1.0 - a) * *x;
                            *x = s;
                        }
                    }
                    out
                }
            }
            InputKind::Multisine => {
                let lines = ((self.bandwidth * n as f64 / 2.0).floor() as usize).max(1);
                let phases: Vec<f64> = (0..lines).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                (0..n)
                    .map(|k| {
                        phases
                            .iter()
                            .enumerate()
                            .map(|(l, ph)| (2.0 * PI * (l + 1) as f64 * k as f64 / n as f64 + ph).cos())
                            .sum()
                    })
                    .collect()
            }
        };
        let peak = raw.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = if peak > 0.0 { self.amplitude / peak } else { 0.0 };
        Ok(SignalSeries::new(raw.into_iter().map(|x| T::from_f64_lossy(x * scale)).collect())?)
    }
}

/// Synthetic benchmark: `records` realizations of `model` driven by inputs
/// drawn from `input` (record `i` uses seed `input.seed + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Generator with coefficients, e.g. `0.5*u[k-1] - 0.2*y[k-1] + xi[k]`.
    pub model: String,
    pub noise_std: f64,
    #[serde(default)]
    pub noise_seed: u64,
    pub input: InputSpec,
    #[serde(default = "one")]
    pub records: usize,
}

fn one() -> usize {
    1
}

impl SyntheticSpec {
    pub fn generate<T: Scalar>(&self) -> Result<Vec<Dataset<T>>, DataError> {
        let model = NarxModel::<T>::from_polynomial(&self.model)?;
        (0..self.records)
            .map(|i| {
                let input = InputSpec { seed: self.input.seed.wrapping_add(i as u64), ..self.input.clone() };
                let u = input.generate()?;
                let mut d = synthesize(&model, &u, self.noise_std, self.noise_seed.wrapping_add(i as u64))?;
                d.name = format!("synthetic-{i}");
                Ok(d)
            })
            .collect()
    }
}

/// Part of one record; the whole record when `range` is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub record: usize,
    /// Half-open sample range `[start, end)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[usize; 2]>,
}

impl Segment {
    pub fn whole(record: usize) -> Self {
        Self { record, range: None }
    }

    pub fn range(record: usize, start: usize, end: usize) -> Self {
        Self { record, range: Some([start, end]) }
    }

    fn bounds(&self, len: usize) -> [usize; 2] {
        self.range.unwrap_or([0, len])
    }
}

/// Assignment of record segments to the estimation, validation and test
/// roles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default)]
    pub estimation: Vec<Segment>,
    #[serde(default)]
    pub validation: Vec<Segment>,
    #[serde(default)]
    pub test: Vec<Segment>,
}

/// Result of [`split`]; every role is a list of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub estimation: Vec<Dataset<T>>,
    pub validation: Vec<Dataset<T>>,
    pub test: Vec<Dataset<T>>,
}

impl<T> Split<T> {
    /// Least squares needs at least one estimation record.
    pub fn estimation_usable(&self) -> bool {
        !self.estimation.is_empty()
    }
}

impl SplitSpec {
    /// First `n - 1` records for estimation, the last for validation.
    pub fn leave_last_out(n: usize) -> Self {
        Self {
            estimation: (0..n.saturating_sub(1)).map(Segment::whole).collect(),
            validation: n.checked_sub(1).map(Segment::whole).into_iter().collect(),
            test: Vec::new(),
        }
    }
}

/// Cuts `records` according to `spec`.
pub fn split<T: Scalar>(records: &[Dataset<T>], spec: &SplitSpec) -> Result<Split<T>, DataError> {
    let cut = |segs: &[Segment]| -> Result<Vec<Dataset<T>>, DataError> {
        segs.iter()
            .map(|s| {
                let d = records
                    .get(s.record)
                    .ok_or(DataError::UnknownRecord { record: s.record, count: records.len() })?;
                let [start, end] = s.bounds(d.len());
                if start >= end || end > d.len() {
                    return Err(DataError::RangeOutOfBounds { record: s.record, start, end, len: d.len() });
                }
                if s.range.is_none() {
                    Ok(d.clone())
                } else {
                    d.slice(start, end)
                }
            })
            .collect()
    };
    for e in &spec.estimation {
        for v in spec.validation.iter().filter(|v| v.record == e.record) {
            let len = records.get(e.record).map_or(0, Dataset::len);
            let ([a0, a1], [b0, b1]) = (e.bounds(len), v.bounds(len));
            if a0 < b1 && b0 < a1 {
                return Err(DataError::Overlap { record: e.record });
            }
        }
    }
    Ok(Split { estimation: cut(&spec.estimation)?, validation: cut(&spec.validation)?, test: cut(&spec.test)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_rows() {
        let f = csv_file("u,y\n0,0\n1,0.5\n0,0.25\n");
        let d: Dataset<f64> = load_csv(f.path(), ("u", "y")).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.y.samples(), &[0.0, 0.5, 0.25]);
    }

    #[test]
    fn load_errors() {
        let f = csv_file("u,z\n0,0\n");
        assert!(matches!(load_csv::<f64>(f.path(), ("u", "y")), Err(DataError::MissingColumn(c)) if c == "y"));
        let f = csv_file("u,y\n0,0\n1,nan\n");
        assert!(matches!(load_csv::<f64>(f.path(), ("u", "y")), Err(DataError::NonFiniteSample { row: 1 })));
        assert!(matches!(load_csv::<f64>("/no/such/file.csv", ("u", "y")), Err(DataError::FileNotFound(_))));
        let f = csv_file("u,y\n0,abc\n");
        assert!(matches!(load_csv::<f64>(f.path(), ("u", "y")), Err(DataError::Parse { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new("x", vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, f.path()).unwrap();
        let back: Dataset<f64> = load_csv(f.path(), ("u", "y")).unwrap();
        assert_eq!(back.u, d.u);
        assert_eq!(back.y, d.y);
    }

    #[test]
    fn noiseless_fir_synthesis() {
        let g = NarxModel::<f64>::from_polynomial("0.5*u[k-1] + xi[k]").unwrap();
        let u = SignalSeries::new((0..20).map(|k| k as f64).collect()).unwrap();
        let d = synthesize(&g, &u, 0.0, 1).unwrap();
        assert_eq!(d.y.samples()[0], 0.0);
        for k in 1..20 {
            assert_eq!(d.y.samples()[k], 0.5 * (k - 1) as f64);
        }
    }

    #[test]
    fn synthesis_is_seeded() {
        let g = NarxModel::<f64>::from_polynomial("0.5*u[k-1] - 0.3*y[k-1] + xi[k]").unwrap();
        let spec = InputSpec { kind: InputKind::Gaussian, amplitude: 0.1, length: 200, seed: 3, bandwidth: 0.3 };
        let u = spec.generate().unwrap();
        assert_eq!(synthesize(&g, &u, 1e-3, 9).unwrap(), synthesize(&g, &u, 1e-3, 9).unwrap());
        assert_ne!(synthesize(&g, &u, 1e-3, 9).unwrap(), synthesize(&g, &u, 1e-3, 10).unwrap());
    }

    #[test]
    fn unstable_generator_diverges() {
        let g = NarxModel::<f64>::from_polynomial("2*y[k-1]^3 + u[k] + xi[k]").unwrap();
        let u = SignalSeries::new(vec![1.0; 100]).unwrap();
        assert!(matches!(synthesize(&g, &u, 0.0, 0), Err(DataError::Diverged(_))));
    }

    #[test]
    fn inputs_respect_amplitude() {
        for kind in [InputKind::Gaussian, InputKind::Multisine] {
            for bandwidth in [0.2, 1.0] {
                let spec = InputSpec { kind, amplitude: 0.15, length: 512, seed: 1, bandwidth };
                let u: SignalSeries<f64> = spec.generate().unwrap();
                let peak = u.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                assert!((peak - 0.15).abs() < 1e-12);
                assert_eq!(spec.generate::<f64>().unwrap(), u);
            }
        }
    }

    fn records(n: usize, len: usize) -> Vec<Dataset<f64>> {
        (0..n).map(|i| Dataset::new(format!("r{i}"), vec![i as f64; len], vec![0.0; len]).unwrap()).collect()
    }

    #[test]
    fn nine_and_one() {
        let s = split(&records(10, 8), &SplitSpec::leave_last_out(10)).unwrap();
        assert_eq!((s.estimation.len(), s.validation.len(), s.test.len()), (9, 1, 0));
        assert_eq!(s.validation[0].u.samples()[0], 9.0);
    }

    #[test]
    fn split_errors() {
        let r = records(2, 10);
        let overlap = SplitSpec {
            estimation: vec![Segment::range(0, 0, 6)],
            validation: vec![Segment::range(0, 5, 10)],
            test: vec![],
        };
        assert!(matches!(split(&r, &overlap), Err(DataError::Overlap { record: 0 })));
        let oob = SplitSpec { estimation: vec![Segment::range(1, 0, 11)], ..Default::default() };
        assert!(matches!(split(&r, &oob), Err(DataError::RangeOutOfBounds { .. })));
        let missing = SplitSpec { estimation: vec![Segment::whole(5)], ..Default::default() };
        assert!(matches!(split(&r, &missing), Err(DataError::UnknownRecord { .. })));
        let adjacent = SplitSpec {
            estimation: vec![Segment::range(0, 0, 5)],
            validation: vec![Segment::range(0, 5, 10)],
            test: vec![],
        };
        let s = split(&r, &adjacent).unwrap();
        assert_eq!((s.estimation[0].len(), s.validation[0].len()), (5, 5));
    }

    #[test]
    fn test_only_split_is_unusable_for_estimation() {
        let spec = SplitSpec { test: vec![Segment::whole(0), Segment::whole(1)], ..Default::default() };
        let s = split(&records(2, 4), &spec).unwrap();
        assert!(!s.estimation_usable());
        assert_eq!(s.test.len(), 2);
    }
}
