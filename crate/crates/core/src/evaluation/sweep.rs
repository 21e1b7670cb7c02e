use std::time::Instant;

use super::experiment::{run_forecast, ForecastData, ForecastSetup};
use super::lemma::reoccurrence_n;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

/// Look-back lengths of the long-window study.
pub const STUDY_LOOKBACKS: [usize; 8] = [48, 96, 192, 336, 720, 1152, 1728, 2304];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: usize,
    pub mse: f64,
    pub mae: f64,
    pub normalized_mse: f64,
    pub n_value: Option<usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment_id: String,
    /// Strictly increasing `axis_value`.
    pub rows: Vec<SweepRow>,
    /// Axis values that could not run, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl SweepResult {
    fn new(experiment_id: &str, mut rows: Vec<SweepRow>, skipped: Vec<(usize, String)>) -> Self {
        rows.sort_by_key(|r| r.axis_value);
        let norm = min_max(&rows.iter().map(|r| r.mse).collect::<Vec<_>>());
        for (r, n) in rows.iter_mut().zip(norm) {
            r.normalized_mse = n;
        }
        Self {
            experiment_id: experiment_id.to_string(),
            rows,
            skipped,
        }
    }

    pub fn row(&self, axis_value: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.axis_value == axis_value)
    }

    /// Stand-in MSE for segment length 0: the mean of the MSEs at `L` and `2L`.
    pub fn zero_length_estimate(&self, period: usize) -> Option<f64> {
        Some((self.row(period)?.mse + self.row(2 * period)?.mse) / 2.0)
    }
}

/// Min-max scaling to `[0, 1]`; a flat input maps to zeros.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Per-cell seed derived from the base seed.
pub fn cell_seed(base: u64, cell: usize) -> u64 {
    base ^ cell as u64
}

/// Trains one UVH reconstruction forecaster per segment length
/// `(i/k)·period`, reporting MSE and the recurrence count of each length.
pub fn segment_sweep(
    setup: &ForecastSetup,
    data: &ForecastData,
    period: usize,
    k: usize,
    i_values: &[usize],
    exec: Exec,
) -> Result<SweepResult> {
    let mut cells = Vec::with_capacity(i_values.len());
    for &i in i_values {
        if i == 0 || k == 0 {
            return Err(Error::NonPositive);
        }
        if (i * period) % k != 0 {
            return Err(Error::NonIntegerSegment { i, k, period });
        }
        cells.push((i, i * period / k));
    }
    let rows = exec::map_indexed(exec, &cells, |idx, &(i, seg)| -> Result<SweepRow> {
        let mut cell = setup.clone();
        cell.imaging.period = Some(seg);
        cell.train.seed = cell_seed(setup.train.seed, idx);
        let start = Instant::now();
        let run = run_forecast(&cell, data)?;
        Ok(SweepRow {
            axis_value: seg,
            mse: run.scores.mse,
            mae: run.scores.mae,
            normalized_mse: 0.0,
            n_value: Some(reoccurrence_n(i, k)?),
            seconds: start.elapsed().as_secs_f64(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("segment", rows, Vec::new()))
}

/// One forecaster per look-back length; lengths whose windows do not fit
/// the splits are skipped with a reason.
pub fn lookback_sweep(
    setup: &ForecastSetup,
    data: &ForecastData,
    lengths: &[usize],
    exec: Exec,
) -> Result<SweepResult> {
    let mut skipped = Vec::new();
    let mut runnable = Vec::new();
    let shortest = data.train.len().min(data.val.len()).min(data.test.len());
    for &h in lengths {
        let mut cell = setup.clone();
        cell.lookback = h;
        let need = match cell.pipeline(data.variates()).and_then(|p| p.train_horizon(h)) {
            Ok(f) => h + f,
            Err(e) => {
                skipped.push((h, e.to_string()));
                continue;
            }
        };
        if need > shortest {
            skipped.push((h, format!("needs {need} steps per window, shortest split has {shortest}")));
        } else {
            runnable.push(cell);
        }
    }
    let rows = exec::map_indexed(exec, &runnable, |idx, cell| -> Result<SweepRow> {
        let mut cell = cell.clone();
        cell.train.seed = cell_seed(setup.train.seed, idx);
        let start = Instant::now();
        let run = run_forecast(&cell, data)?;
        Ok(SweepRow {
            axis_value: cell.lookback,
            mse: run.scores.mse,
            mae: run.scores.mae,
            normalized_mse: 0.0,
            n_value: None,
            seconds: start.elapsed().as_secs_f64(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("lookback", rows, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{ImagingMethod, ImagingParams};
    use crate::models::{Arch, ModelConfig, TaskKind};
    use crate::series::{gen_periodic, Waveform};
    use crate::training::TrainConfig;

    #[test]
    fn min_max_range() {
        assert_eq!(min_max(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max(&[1.0, 1.0]), vec![0.0, 0.0]);
    }

    fn tiny_setup() -> (ForecastSetup, ForecastData) {
        let s = gen_periodic(8, 600, Waveform::Sine, 1, 0.0).unwrap();
        let data = ForecastData::from_series(&s.into(), [0.6, 0.2, 0.2]).unwrap();
        let setup = ForecastSetup {
            model: ModelConfig {
                embed_dim: 8,
                num_heads: 2,
                patch_size: 4,
                image_size: 16,
                ..ModelConfig::new(Arch::MiniMae, TaskKind::ForecastReconstruct)
            },
            method: ImagingMethod::Uvh,
            imaging: ImagingParams { period: Some(8), ..Default::default() },
            lookback: 32,
            horizon: 8,
            train_stride: 8,
            eval_stride: 16,
            train: TrainConfig {
                learning_rate: 1e-3,
                max_epochs: 1,
                exec: Exec::Sequential,
                ..TrainConfig::for_task(TaskKind::ForecastReconstruct)
            },
        };
        (setup, data)
    }

    #[test]
    fn segment_sweep_rows_and_n() {
        let (setup, data) = tiny_setup();
        let res = segment_sweep(&setup, &data, 8, 4, &[2, 4, 6, 8], Exec::Sequential).unwrap();
        let axis: Vec<usize> = res.rows.iter().map(|r| r.axis_value).collect();
        assert_eq!(axis, vec![4, 8, 12, 16]);
        let n: Vec<Option<usize>> = res.rows.iter().map(|r| r.n_value).collect();
        assert_eq!(n, vec![Some(2), Some(1), Some(2), Some(1)]);
        assert!(res.rows.iter().all(|r| (0.0..=1.0).contains(&r.normalized_mse)));
        assert!(res.zero_length_estimate(8).is_some());
        assert!(matches!(
            segment_sweep(&setup, &data, 8, 3, &[1], Exec::Sequential),
            Err(Error::NonIntegerSegment { .. })
        ));
    }

    #[test]
    fn lookback_sweep_skips_long_windows() {
        let (setup, data) = tiny_setup();
        let res = lookback_sweep(&setup, &data, &[32, 48, 720, 2304], Exec::Sequential).unwrap();
        assert_eq!(res.rows.iter().map(|r| r.axis_value).collect::<Vec<_>>(), vec![32, 48]);
        assert_eq!(res.skipped.iter().map(|s| s.0).collect::<Vec<_>>(), vec![720, 2304]);
    }
}
