//! Metrics, temporal perturbations, the segment-recurrence lemma, and the
//! segment-length / look-back sweeps.

mod cost;
mod experiment;
mod lemma;
mod metrics;
mod perturb;
mod sweep;

pub use cost::{measure_costs, TimingReport};
pub use experiment::{
    evaluate_classification, evaluate_forecast, forecast_windows, run_forecast, ForecastData, ForecastRun,
    ForecastScores, ForecastSetup,
};
pub use lemma::{lemma_table, reoccurrence_brute_force, reoccurrence_n, LemmaRow};
pub use metrics::{metric_accuracy, metric_mae, metric_mse, performance_drop, Better};
pub use perturb::{perturb, perturb_rows, PerturbKind, PerturbMode};
pub use sweep::{cell_seed, lookback_sweep, min_max, segment_sweep, SweepResult, SweepRow, STUDY_LOOKBACKS};
