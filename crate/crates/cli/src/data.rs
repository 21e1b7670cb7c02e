use anyhow::{Context, Result};
use tsimg::evaluation::{ForecastData, ForecastSetup};
use tsimg::framework::{ImagingMethod, ImagingParams};
use tsimg::imaging::detect_period;
use tsimg::io::{load_ett_csv, load_labeled_windows_csv, DatasetFormat, DatasetManifest};
use tsimg::models::{Arch, ModelConfig, TaskKind};
use tsimg::series::{gen_ar1, gen_periodic, MultivariateSeries, WindowSample, Waveform};
use tsimg::training::TrainConfig;
use tsimg::Exec;

use crate::args::{DataArgs, FitArgs, ForecastArgs, ImagingArgs, InputFormat, ModelArgs, Synthetic};
use crate::UsageError;

pub fn split_ratios(d: &DataArgs) -> Result<[f64; 3]> {
    let r: [f64; 3] = d
        .split
        .as_slice()
        .try_into()
        .map_err(|_| UsageError(format!("--split needs three ratios, got {}", d.split.len())))?;
    if r.iter().any(|&v| !(v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(UsageError(format!("--split ratios {r:?} must be positive and sum to 1")).into());
    }
    Ok(r)
}

fn manifest(d: &DataArgs, format: DatasetFormat) -> Result<DatasetManifest> {
    let path = d.input.clone().ok_or_else(|| UsageError("--input is required".into()))?;
    let mut m = DatasetManifest::new(path, format);
    if !d.columns.is_empty() {
        m.columns = Some(d.columns.clone());
    }
    m.variates = d.variates;
    m.split = split_ratios(d)?;
    m.validate()?;
    Ok(m)
}

/// The series named by `--input` (ETT format) or `--synthetic`.
pub fn load_series(d: &DataArgs, seed: u64) -> Result<MultivariateSeries> {
    let seed = d.data_seed.unwrap_or(seed);
    if let Some(kind) = d.synthetic {
        let s = match kind {
            Synthetic::Sine => gen_periodic(d.period, d.length, Waveform::Sine, seed, d.noise)?,
            Synthetic::Sawtooth => gen_periodic(d.period, d.length, Waveform::Sawtooth, seed, d.noise)?,
            Synthetic::Composite => gen_periodic(d.period, d.length, Waveform::Composite, seed, d.noise)?,
            Synthetic::Ar1 => gen_ar1(d.phi, d.length, seed)?,
        };
        return Ok(s.into());
    }
    if d.format != InputFormat::Ett {
        return Err(UsageError("a continuous series needs --format ett or --synthetic".into()).into());
    }
    let m = manifest(d, DatasetFormat::EttCsv)?;
    load_ett_csv(&m).with_context(|| format!("reading {}", m.path.display()))
}

/// Labelled windows split chronologically, plus the class count.
pub fn load_labeled(d: &DataArgs) -> Result<([Vec<WindowSample>; 3], usize)> {
    if d.synthetic.is_some() || d.format != InputFormat::Windows {
        return Err(UsageError("classification reads labelled windows: use --input with --format windows".into()).into());
    }
    let m = manifest(d, DatasetFormat::LabeledWindowsCsv)?;
    let (mut all, classes) = load_labeled_windows_csv(&m).with_context(|| format!("reading {}", m.path.display()))?;
    let n = all.len();
    let n_train = (n as f64 * m.split[0]).floor() as usize;
    let n_val = (n as f64 * m.split[1]).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        anyhow::bail!("{n} labelled windows are too few for split {:?}", m.split);
    }
    let test = all.split_off(n_train + n_val);
    let val = all.split_off(n_train);
    Ok(([all, val, test], classes))
}

pub fn imaging_params(a: &ImagingArgs) -> ImagingParams {
    ImagingParams {
        period: a.segment,
        window_len: a.window_len,
        hop: a.hop,
        n_filters: a.filters,
        num_scales: a.scales,
        rp_embed_dim: a.rp_dim,
        rp_delay: a.rp_delay,
        lineplot_height: a.height,
        lineplot_thickness: a.thickness,
    }
}

/// The UVH segment length: the flag, or the dominant FFT period of the
/// first variate of `train`.
pub fn resolve_segment(a: &ImagingArgs, train: &MultivariateSeries) -> Result<usize> {
    match a.segment {
        Some(l) => Ok(l),
        None => Ok(detect_period(train.variate(0), 3)?.chosen_l),
    }
}

pub fn model_config(m: &ModelArgs, arch: Arch, task: TaskKind) -> ModelConfig {
    ModelConfig {
        embed_dim: m.embed_dim,
        num_heads: m.heads,
        patch_size: m.patch_size,
        image_size: m.image_size,
        ..ModelConfig::new(arch, task)
    }
}

pub fn train_config(f: &FitArgs, task: TaskKind, seed: u64, exec: Exec) -> TrainConfig {
    let base = TrainConfig::for_task(task);
    TrainConfig {
        learning_rate: f.lr.unwrap_or(base.learning_rate),
        batch_size: f.batch_size.unwrap_or(base.batch_size),
        max_epochs: f.epochs.unwrap_or(base.max_epochs),
        patience: match f.patience {
            Some(0) => None,
            Some(p) => Some(p),
            None => base.patience,
        },
        seed,
        exec,
    }
}

pub struct ForecastJob {
    pub setup: ForecastSetup,
    pub data: ForecastData,
}

/// Standardized splits and a routed setup for a forecasting task. UVH gets
/// its segment length resolved here.
pub fn forecast_job(
    d: &DataArgs,
    im: &ImagingArgs,
    method: ImagingMethod,
    model: ModelConfig,
    fit: TrainConfig,
    fc: &ForecastArgs,
) -> Result<ForecastJob> {
    let series = load_series(d, fit.seed)?;
    let data = ForecastData::from_series(&series, split_ratios(d)?)?;
    let mut imaging = imaging_params(im);
    if method == ImagingMethod::Uvh {
        imaging.period = Some(resolve_segment(im, &data.train)?);
    }
    if fc.stride == 0 || fc.eval_stride == Some(0) {
        return Err(UsageError("strides must be positive".into()).into());
    }
    let setup = ForecastSetup {
        model,
        method,
        imaging,
        lookback: fc.lookback,
        horizon: fc.horizon,
        train_stride: fc.stride,
        eval_stride: fc.eval_stride.unwrap_or(fc.stride),
        train: fit,
    };
    setup.pipeline(data.variates())?;
    Ok(ForecastJob { setup, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        d: DataArgs,
    }

    fn data(args: &[&str]) -> DataArgs {
        Wrap::try_parse_from(std::iter::once("t").chain(args.iter().copied())).unwrap().d
    }

    #[test]
    fn split_must_have_three_positive_ratios() {
        assert_eq!(split_ratios(&data(&["--synthetic", "sine"])).unwrap(), [0.7, 0.1, 0.2]);
        assert!(split_ratios(&data(&["--synthetic", "sine", "--split", "0.5,0.5"])).is_err());
        assert!(split_ratios(&data(&["--synthetic", "sine", "--split", "0.5,0.6,-0.1"])).is_err());
    }

    #[test]
    fn synthetic_series_follow_the_data_seed() {
        let a = load_series(&data(&["--synthetic", "ar1", "--length", "50"]), 1).unwrap();
        let b = load_series(&data(&["--synthetic", "ar1", "--length", "50", "--data-seed", "1"]), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }

    #[test]
    fn patience_zero_disables_early_stopping() {
        let f = FitArgs {
            lr: None,
            batch_size: None,
            epochs: None,
            patience: Some(0),
        };
        let c = train_config(&f, TaskKind::ForecastLinear, 3, Exec::Sequential);
        assert_eq!(c.patience, None);
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.seed, 3);
    }
}
