//! Time-series containers, windowing, split handling and synthetic generators.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::seeded_rng;

/// A single real-valued series.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateSeries {
    values: Vec<f64>,
}

impl UnivariateSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `d` variates of equal length `T`, stored variate-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    rows: Vec<Vec<f64>>,
    names: Option<Vec<String>>,
}

impl MultivariateSeries {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::check(&rows)?;
        Ok(Self { rows, names: None })
    }

    pub fn with_names(rows: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        Self::check(&rows)?;
        if names.len() != rows.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                found: names.len(),
            });
        }
        Ok(Self {
            rows,
            names: Some(names),
        })
    }

    fn check(rows: &[Vec<f64>]) -> Result<()> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        if first.is_empty() {
            return Err(Error::EmptyInput);
        }
        for row in rows {
            if row.len() != first.len() {
                return Err(Error::LengthMismatch {
                    expected: first.len(),
                    found: row.len(),
                });
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(i));
            }
        }
        Ok(())
    }

    /// Number of variates `d`.
    pub fn dims(&self) -> usize {
        self.rows.len()
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn variate(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    /// Time steps `[start, end)` of every variate.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {end}) of series with {} steps",
                self.len()
            )));
        }
        Ok(Self {
            rows: self.rows.iter().map(|r| r[start..end].to_vec()).collect(),
            names: self.names.clone(),
        })
    }
}

impl From<UnivariateSeries> for MultivariateSeries {
    fn from(s: UnivariateSeries) -> Self {
        Self {
            rows: vec![s.values],
            names: None,
        }
    }
}

/// What a window is asked to predict.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowTarget {
    /// `d × T'` future values.
    Forecast(Vec<Vec<f64>>),
    Class(usize),
}

/// One model input: `d × H` look-back plus its target.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub lookback: Vec<Vec<f64>>,
    pub target: WindowTarget,
}

impl WindowSample {
    pub fn lookback_len(&self) -> usize {
        self.lookback.first().map_or(0, Vec::len)
    }

    pub fn forecast(&self) -> Option<&[Vec<f64>]> {
        match &self.target {
            WindowTarget::Forecast(t) => Some(t),
            WindowTarget::Class(_) => None,
        }
    }

    pub fn class_label(&self) -> Option<usize> {
        match self.target {
            WindowTarget::Class(c) => Some(c),
            WindowTarget::Forecast(_) => None,
        }
    }
}

/// Cuts `series` into adjacent look-back / horizon pairs.
pub fn slide_windows(
    series: &MultivariateSeries,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    if lookback == 0 || stride == 0 {
        return Err(Error::InvalidArgument(
            "lookback and stride must be at least 1".into(),
        ));
    }
    let t = series.len();
    let needed = lookback + horizon;
    if t < needed {
        return Err(Error::EmptyResult { len: t, needed });
    }
    let count = (t - needed) / stride + 1;
    Ok((0..count)
        .map(|w| {
            let start = w * stride;
            let lb = series
                .rows
                .iter()
                .map(|r| r[start..start + lookback].to_vec())
                .collect();
            let tgt = series
                .rows
                .iter()
                .map(|r| r[start + lookback..start + needed].to_vec())
                .collect();
            WindowSample {
                lookback: lb,
                target: WindowTarget::Forecast(tgt),
            }
        })
        .collect())
}

/// Per-variate statistics of the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Variates whose training std is zero; they standardize to all zeros.
    pub degenerate: Vec<bool>,
}

impl SplitStats {
    pub fn fit(series: &MultivariateSeries) -> Self {
        let mut mean = Vec::with_capacity(series.dims());
        let mut std = Vec::with_capacity(series.dims());
        for row in series.rows() {
            let (m, s) = mean_std(row);
            mean.push(m);
            std.push(s);
        }
        let degenerate = std.iter().map(|&s| s == 0.0).collect();
        Self {
            mean,
            std,
            degenerate,
        }
    }

    pub fn apply(&self, series: &MultivariateSeries) -> Result<MultivariateSeries> {
        self.check_dims(series)?;
        let rows = series
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if self.degenerate[i] {
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|v| (v - self.mean[i]) / self.std[i]).collect()
                }
            })
            .collect();
        Ok(MultivariateSeries {
            rows,
            names: series.names.clone(),
        })
    }

    /// Maps standardized values back to the original scale. Degenerate
    /// variates come back as their constant training value.
    pub fn invert(&self, series: &MultivariateSeries) -> Result<MultivariateSeries> {
        self.check_dims(series)?;
        let rows = series
            .rows()
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|v| {
                        if self.degenerate[i] {
                            self.mean[i]
                        } else {
                            v * self.std[i] + self.mean[i]
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(MultivariateSeries {
            rows,
            names: series.names.clone(),
        })
    }

    fn check_dims(&self, series: &MultivariateSeries) -> Result<()> {
        if series.dims() != self.mean.len() {
            return Err(Error::LengthMismatch {
                expected: self.mean.len(),
                found: series.dims(),
            });
        }
        Ok(())
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedSplits {
    pub train: MultivariateSeries,
    pub val: MultivariateSeries,
    pub test: MultivariateSeries,
}

/// Z-scores all three splits with statistics of `train`.
pub fn standardize_by_train(
    train: &MultivariateSeries,
    val: &MultivariateSeries,
    test: &MultivariateSeries,
) -> Result<(StandardizedSplits, SplitStats)> {
    let stats = SplitStats::fit(train);
    let splits = StandardizedSplits {
        train: stats.apply(train)?,
        val: stats.apply(val)?,
        test: stats.apply(test)?,
    };
    Ok((splits, stats))
}

/// Chronological train/val/test split. Ratios must be positive and sum to 1.
pub fn chronological_split(
    series: &MultivariateSeries,
    ratios: [f64; 3],
) -> Result<[MultivariateSeries; 3]> {
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let t = series.len();
    let n_train = (t as f64 * ratios[0]).floor() as usize;
    let n_val = (t as f64 * ratios[1]).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= t {
        return Err(Error::SeriesTooShort { len: t, min: 3 });
    }
    Ok([
        series.slice(0, n_train)?,
        series.slice(n_train, n_train + n_val)?,
        series.slice(n_train + n_val, t)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Sine,
    Sawtooth,
    /// Sum of three harmonics; not symmetric under a half-period shift.
    Composite,
}

impl std::str::FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Self::Sine),
            "sawtooth" => Ok(Self::Sawtooth),
            "composite" => Ok(Self::Composite),
            _ => Err(Error::InvalidArgument(format!("unknown waveform {s:?}"))),
        }
    }
}

impl Waveform {
    /// Value at phase `u ∈ [0, 1)`.
    fn at(self, u: f64) -> f64 {
        use std::f64::consts::TAU;
        match self {
            Waveform::Sine => (TAU * u).sin(),
            Waveform::Sawtooth => 2.0 * u - 1.0,
            Waveform::Composite => {
                (TAU * u).sin() + 0.6 * (2.0 * TAU * u + 0.5).sin() + 0.3 * (3.0 * TAU * u).cos()
            }
        }
    }
}

/// Periodic signal with optional Gaussian noise.
///
/// The clean part is evaluated on `t mod period`, so with zero noise the
/// series repeats bit-for-bit.
pub fn gen_periodic(
    period: usize,
    length: usize,
    waveform: Waveform,
    seed: u64,
    noise_std: f64,
) -> Result<UnivariateSeries> {
    if period < 1 || period > length {
        return Err(Error::InvalidPeriod { period, length });
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!("noise_std {noise_std}")));
    }
    let one_period: Vec<f64> = (0..period)
        .map(|t| waveform.at(t as f64 / period as f64))
        .collect();
    let mut values: Vec<f64> = (0..length).map(|t| one_period[t % period]).collect();
    if noise_std > 0.0 {
        let mut rng = seeded_rng(seed);
        let normal = Normal::new(0.0, noise_std).expect("finite std");
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    UnivariateSeries::new(values)
}

/// AR(1) process with unit-variance Gaussian innovations, started from its
/// stationary distribution.
pub fn gen_ar1(phi: f64, length: usize, seed: u64) -> Result<UnivariateSeries> {
    if !(phi.abs() < 1.0) {
        return Err(Error::UnstableCoefficient(phi));
    }
    if length == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = seeded_rng(seed);
    let mut draw = || -> f64 { rng.sample(StandardNormal) };
    let mut values = Vec::with_capacity(length);
    let mut x = draw() / (1.0 - phi * phi).sqrt();
    values.push(x);
    for _ in 1..length {
        x = phi * x + draw();
        values.push(x);
    }
    UnivariateSeries::new(values)
}
