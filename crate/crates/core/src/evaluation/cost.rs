use std::time::Instant;

use super::experiment::{forecast_windows, run_forecast, ForecastData, ForecastSetup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub trainable_param_count: usize,
    pub train_minutes: f64,
    /// Mean over test windows, imaging included.
    pub inference_ms_per_sample: f64,
}

/// Trains the setup once and times training and per-window inference.
pub fn measure_costs(setup: &ForecastSetup, data: &ForecastData) -> Result<TimingReport> {
    let run = run_forecast(setup, data)?;
    let test = forecast_windows(&data.test, setup.lookback, setup.horizon, setup.eval_stride)?;
    if test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let start = Instant::now();
    for w in &test {
        run.pipeline.forecast(&run.model, &w.lookback)?;
    }
    let ms = start.elapsed().as_secs_f64() * 1e3 / test.len() as f64;
    Ok(TimingReport {
        trainable_param_count: run.model.param_count(),
        train_minutes: run.train_seconds / 60.0,
        inference_ms_per_sample: ms,
    })
}

#[cfg(test)]
mod tests {
    use crate::models::{Arch, Model, ModelConfig, TaskKind};

    #[test]
    fn ablation_parameter_count() {
        // Closed form from tensor shapes: embed 192·64+64, positions 64·64,
        // mixer 64·64+64, head (64·64)·96+96.
        let cfg = ModelConfig::new(Arch::WithoutLvm, TaskKind::ForecastLinear);
        let expected = 192 * 64 + 64 + 64 * 64 + 64 * 64 + 64 + 64 * 64 * 96 + 96;
        assert_eq!(expected, 413_920);
        assert_eq!(Model::new(cfg.clone(), 0).unwrap().param_count(), expected);
        assert_eq!(Model::new(cfg, 1).unwrap().param_count(), expected);
    }
}
