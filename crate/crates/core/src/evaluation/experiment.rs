use std::time::Instant;

use super::metrics::{metric_accuracy, metric_mae, metric_mse};
use super::perturb::{perturb_rows, PerturbMode};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::framework::{ImagingMethod, ImagingParams, Pipeline};
use crate::models::{Model, ModelConfig};
use crate::series::{chronological_split, slide_windows, standardize_by_train, MultivariateSeries, SplitStats, WindowSample};
use crate::training::{train, History, TrainConfig};

/// Chronological train/val/test splits, standardized by train statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastData {
    pub train: MultivariateSeries,
    pub val: MultivariateSeries,
    pub test: MultivariateSeries,
    pub stats: SplitStats,
}

impl ForecastData {
    pub fn from_series(series: &MultivariateSeries, ratios: [f64; 3]) -> Result<Self> {
        let [tr, va, te] = chronological_split(series, ratios)?;
        let (s, stats) = standardize_by_train(&tr, &va, &te)?;
        Ok(Self {
            train: s.train,
            val: s.val,
            test: s.test,
            stats,
        })
    }

    pub fn variates(&self) -> usize {
        self.train.dims()
    }
}

/// Everything needed to train and score one forecaster.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSetup {
    pub model: ModelConfig,
    pub method: ImagingMethod,
    pub imaging: ImagingParams,
    pub lookback: usize,
    pub horizon: usize,
    pub train_stride: usize,
    pub eval_stride: usize,
    pub train: TrainConfig,
}

impl ForecastSetup {
    pub fn pipeline(&self, variates: usize) -> Result<Pipeline> {
        Pipeline::new(self.method, self.imaging.clone(), self.model.clone(), variates, self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastScores {
    pub mse: f64,
    pub mae: f64,
}

/// A trained forecaster with its clean test scores.
#[derive(Debug, Clone)]
pub struct ForecastRun {
    pub pipeline: Pipeline,
    pub model: Model,
    pub history: History,
    pub scores: ForecastScores,
    pub train_seconds: f64,
}

/// Windows of `series` with `lookback` history and `horizon` future steps.
pub fn forecast_windows(series: &MultivariateSeries, lookback: usize, horizon: usize, stride: usize) -> Result<Vec<WindowSample>> {
    slide_windows(series, lookback, horizon, stride)
}

/// Trains on `data.train`, selects on `data.val`, scores on `data.test`.
pub fn run_forecast(setup: &ForecastSetup, data: &ForecastData) -> Result<ForecastRun> {
    let pipeline = setup.pipeline(data.variates())?;
    let exec = setup.train.exec;
    let train_h = pipeline.train_horizon(setup.lookback)?;
    let tr = forecast_windows(&data.train, setup.lookback, train_h, setup.train_stride)?;
    let va = forecast_windows(&data.val, setup.lookback, train_h, setup.eval_stride)?;
    let tr_ex = pipeline.examples_batch(&tr, exec)?;
    let va_ex = pipeline.examples_batch(&va, exec)?;
    let start = Instant::now();
    let (params, history) = train(&pipeline.model, &tr_ex, &va_ex, &setup.train)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let model = Model::from_params(pipeline.model.clone(), params)?;
    let test = forecast_windows(&data.test, setup.lookback, setup.horizon, setup.eval_stride)?;
    let scores = evaluate_forecast(&pipeline, &model, &test, None, exec)?;
    Ok(ForecastRun {
        pipeline,
        model,
        history,
        scores,
        train_seconds,
    })
}

/// Test scores over `windows`, optionally perturbing each look-back first.
///
/// Window `w` uses perturbation seed `mode.seed + w`.
pub fn evaluate_forecast(
    pipeline: &Pipeline,
    model: &Model,
    windows: &[WindowSample],
    perturbation: Option<PerturbMode>,
    exec: Exec,
) -> Result<ForecastScores> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per = exec::map_indexed(exec, windows, |w, win| -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let lookback = match perturbation {
            Some(m) => perturb_rows(&win.lookback, m.for_window(w))?,
            None => win.lookback.clone(),
        };
        let pred = pipeline.forecast(model, &lookback)?;
        let truth: Vec<Vec<f64>> = win
            .forecast()
            .ok_or(Error::EmptyInput)?
            .iter()
            .map(|f| f[..pipeline.horizon].to_vec())
            .collect();
        Ok((pred, truth))
    });
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for p in per {
        let (a, b) = p?;
        preds.extend(a);
        truths.extend(b);
    }
    Ok(ForecastScores {
        mse: metric_mse(&preds, &truths)?,
        mae: metric_mae(&preds, &truths)?,
    })
}

/// Accuracy over labelled windows, optionally perturbed.
pub fn evaluate_classification(
    pipeline: &Pipeline,
    model: &Model,
    samples: &[WindowSample],
    perturbation: Option<PerturbMode>,
    exec: Exec,
) -> Result<f64> {
    let per = exec::map_indexed(exec, samples, |w, s| -> Result<(usize, usize)> {
        let label = s.class_label().ok_or(Error::EmptyInput)?;
        let lookback = match perturbation {
            Some(m) => perturb_rows(&s.lookback, m.for_window(w))?,
            None => s.lookback.clone(),
        };
        Ok((pipeline.classify(model, &lookback)?, label))
    });
    let mut preds = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for p in per {
        let (a, b) = p?;
        preds.push(a);
        labels.push(b);
    }
    metric_accuracy(&preds, &labels)
}
