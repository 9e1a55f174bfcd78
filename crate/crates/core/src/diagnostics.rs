//! Spread statistics for vector datasets.
//!
//! The central-limit argument behind universality needs inputs whose mass is
//! not concentrated in a few coordinates: `m^{1/4} max|x_i| / ‖x‖ → 0` along
//! the sequence of inputs as `m` grows. These helpers measure that statistic
//! on real data, on decimated copies at smaller `m`, and on synthetic signals.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{domain, Substreams};

/// One input vector. Zero vectors are allowed here and rejected by the
/// statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSample {
    values: Vec<f64>,
}

impl VectorSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("vector entries must be finite, found {v}")));
        }
        Ok(VectorSample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `max|x_i| / ‖x‖`, computed on `x / max|x_i|` so that huge or tiny
    /// entries neither overflow nor underflow.
    fn peak_ratio(&self) -> Result<f64> {
        let peak = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::DegenerateSignal);
        }
        let scaled: f64 = self.values.iter().map(|v| (v / peak) * (v / peak)).sum();
        Ok(1.0 / scaled.sqrt())
    }
}

/// `m^{1/4} · max_i |x_i| / ‖x‖`.
pub fn hyp_statistic(x: &VectorSample) -> Result<f64> {
    Ok((x.dim() as f64).powf(0.25) * x.peak_ratio()?)
}

/// `m · (max_i |x_i| / ‖x‖)⁴`, the fourth power of [`hyp_statistic`].
pub fn hyp_statistic_quartic(x: &VectorSample) -> Result<f64> {
    Ok(x.dim() as f64 * x.peak_ratio()?.powi(4))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Linear,
    Quartic,
}

impl Statistic {
    pub fn eval(&self, x: &VectorSample) -> Result<f64> {
        match self {
            Statistic::Linear => hyp_statistic(x),
            Statistic::Quartic => hyp_statistic_quartic(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Linear => "linear",
            Statistic::Quartic => "quartic",
        }
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Statistic::Linear),
            "quartic" => Ok(Statistic::Quartic),
            other => Err(Error::Parse(format!("unknown statistic `{other}`"))),
        }
    }
}

/// Integer decimation factors; factor `k` keeps coordinates `0, k, 2k, …`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceScheme {
    factors: Vec<usize>,
    /// Rescale each decimated vector back to the original norm.
    pub renormalize: bool,
}

impl SequenceScheme {
    pub fn new(factors: Vec<usize>, renormalize: bool) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Empty("factor list"));
        }
        if factors[0] == 0 {
            return Err(invalid("subsampling factors must be at least 1"));
        }
        if factors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("subsampling factors must be strictly increasing"));
        }
        Ok(SequenceScheme { factors, renormalize })
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Dimension after decimating a length-`m` vector by each factor.
    pub fn dims(&self, m: usize) -> Vec<usize> {
        self.factors.iter().map(|k| m.div_ceil(*k)).collect()
    }
}

/// Decimated copies of `x`, one per factor, at decreasing dimension.
///
/// A copy that is all zeros is returned as is, even with `renormalize`.
pub fn subsample_sequence(x: &VectorSample, scheme: &SequenceScheme) -> Result<Vec<VectorSample>> {
    let m = x.dim();
    let largest = *scheme.factors.last().expect("non-empty by construction");
    if largest > m {
        return Err(invalid(format!("factor {largest} exceeds the vector length {m}")));
    }
    let target = x.norm();
    Ok(scheme
        .factors
        .iter()
        .map(|&k| {
            if k == 1 {
                return x.clone();
            }
            let mut values: Vec<f64> = x.values.iter().step_by(k).copied().collect();
            if scheme.renormalize {
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    let c = target / norm;
                    values.iter_mut().for_each(|v| *v *= c);
                }
            }
            VectorSample { values }
        })
        .collect())
}

/// Summary of one statistic at one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub m: usize,
    pub mean: f64,
    /// Population standard deviation over the included samples.
    pub std: f64,
    /// Samples whose decimated copy was all zeros.
    pub excluded: usize,
}

/// Mean and spread of `statistic` over the dataset at each dimension of the
/// scheme. Zero vectors are skipped and counted.
pub fn dataset_curve(dataset: &[VectorSample], scheme: &SequenceScheme, statistic: Statistic) -> Result<Vec<CurvePoint>> {
    let first = dataset.first().ok_or(Error::Empty("dataset"))?;
    let m = first.dim();
    if let Some(bad) = dataset.iter().find(|x| x.dim() != m) {
        return Err(Error::DimensionMismatch { expected: m, found: bad.dim() });
    }
    let dims = scheme.dims(m);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(dataset.len()); dims.len()];
    let mut excluded = vec![0usize; dims.len()];
    for x in dataset {
        for (level, sub) in subsample_sequence(x, scheme)?.iter().enumerate() {
            if sub.is_zero() {
                excluded[level] += 1;
            } else {
                values[level].push(statistic.eval(sub)?);
            }
        }
    }
    Ok(dims
        .into_iter()
        .zip(values)
        .zip(excluded)
        .map(|((m, vals), excluded)| {
            let (mean, std) = if vals.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                // shifted by the first value so a constant column is exact
                let n = vals.len() as f64;
                let shift = vals[0];
                let offset = vals.iter().map(|v| v - shift).sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - shift - offset).powi(2)).sum::<f64>() / n;
                (shift + offset, var.sqrt())
            };
            CurvePoint { m, mean, std, excluded }
        })
        .collect())
}

/// `count` vectors `A·sin(2π·c·i/m + φ)` with a random whole number of cycles
/// `c ∈ [1, 8]`, phase `φ` and amplitude `A ∈ [0.5, 2)`.
pub fn synthetic_sinusoids(count: usize, m: usize, seed: u64) -> Result<Vec<VectorSample>> {
    if m < 2 {
        return Err(invalid(format!("sinusoids need at least 2 samples, got {m}")));
    }
    let streams = Substreams::new(seed, &[domain::SYNTHETIC]);
    (0..count)
        .map(|k| {
            let mut rng = streams.stream(k as u64);
            let cycles = rng.random_range(1..=8) as f64;
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..2.0);
            let values = (0..m)
                .map(|i| amp * (2.0 * PI * cycles * i as f64 / m as f64 + phase).sin())
                .collect();
            VectorSample::new(values)
        })
        .collect()
}

/// One vector per CSV row. Lines starting with `#` are comments; all rows
/// must have the same length.
pub fn read_csv(path: &Path) -> Result<Vec<VectorSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out: Vec<VectorSample> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("record {}: `{f}`: {e}", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        let sample = VectorSample::new(values)?;
        if let Some(first) = out.first() {
            if first.dim() != sample.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), found: sample.dim() });
            }
        }
        out.push(sample);
    }
    if out.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(out)
}

/// Shape of a raw `f64` dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub count: usize,
    pub dim: usize,
}

/// Default sidecar location: the data path with `.json` appended.
pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Reads `count × dim` little-endian `f64` values, shape taken from the JSON
/// sidecar.
pub fn read_raw(data: &Path, sidecar: &Path) -> Result<Vec<VectorSample>> {
    let shape: RawSidecar = serde_json::from_reader(BufReader::new(File::open(sidecar)?))?;
    if shape.count == 0 || shape.dim == 0 {
        return Err(Error::Empty("dataset"));
    }
    let expected = shape
        .count
        .checked_mul(shape.dim)
        .and_then(|v| v.checked_mul(8))
        .ok_or(Error::Allocation { rows: shape.count, cols: shape.dim })?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(data)?).read_to_end(&mut bytes)?;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "{} holds {} bytes but the sidecar promises {} x {} doubles ({expected} bytes)",
            data.display(),
            bytes.len(),
            shape.count,
            shape.dim
        )));
    }
    bytes
        .chunks_exact(8 * shape.dim)
        .map(|row| {
            VectorSample::new(
                row.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect(),
            )
        })
        .collect()
}

/// Writes the format read by [`read_raw`].
pub fn write_raw(data: &Path, sidecar: &Path, samples: &[VectorSample]) -> Result<()> {
    let first = samples.first().ok_or(Error::Empty("dataset"))?;
    let dim = first.dim();
    let mut out = BufWriter::new(File::create(data)?);
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
        }
        for v in &s.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    let mut side = File::create(sidecar)?;
    serde_json::to_writer(&mut side, &RawSidecar { count: samples.len(), dim })?;
    writeln!(side)?;
    Ok(())
}
