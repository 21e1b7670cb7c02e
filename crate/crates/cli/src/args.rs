use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsimg::evaluation::PerturbKind;
use tsimg::framework::ImagingMethod;
use tsimg::models::{Arch, TaskKind};

#[derive(Debug, Parser)]
#[command(name = "tsimg", version, about = "Time-series imaging experiments")]
pub struct Cli {
    /// File of `key = value` lines applied before the command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one variate as an image (PGM plus a CSV of raw pixels).
    #[command(args_override_self = true)]
    Render(RenderArgs),
    /// Train a model and write a checkpoint, history and test metrics.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score a checkpoint, optionally under a temporal perturbation.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Segment-length or look-back sweep.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Check the reoccurrence closed form against simulation.
    #[command(args_override_self = true)]
    Lemma(LemmaArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Timestamp column followed by numeric variates.
    Ett,
    /// Headerless labelled windows.
    Windows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    Sine,
    Sawtooth,
    Composite,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Segment,
    Lookback,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset file.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Ett)]
    pub format: InputFormat,
    /// Variate columns to keep (ETT format).
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Variates per labelled window (windows format).
    #[arg(long, default_value_t = 1)]
    pub variates: usize,
    /// Generate a univariate series instead of reading a file.
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    /// Period of the synthetic waveform.
    #[arg(long, default_value_t = 24)]
    pub period: usize,
    #[arg(long, default_value_t = 2000)]
    pub length: usize,
    /// Gaussian noise added to periodic waveforms.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// AR(1) coefficient.
    #[arg(long, default_value_t = 0.9)]
    pub phi: f64,
    /// Seed of the synthetic generator; defaults to `--seed`.
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Train, validation and test ratios.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.1,0.2")]
    pub split: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ImagingArgs {
    #[arg(long, visible_alias = "imaging")]
    pub method: Option<ImagingMethod>,
    /// UVH segment length; detected from the training data when absent.
    #[arg(long, visible_alias = "L")]
    pub segment: Option<usize>,
    /// STFT and filterbank window.
    #[arg(long)]
    pub window_len: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub filters: usize,
    #[arg(long, default_value_t = 32)]
    pub scales: usize,
    #[arg(long, default_value_t = 1)]
    pub rp_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub rp_delay: usize,
    /// Line-plot raster height.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub thickness: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub arch: Option<Arch>,
    #[arg(long, default_value_t = 64)]
    pub image_size: usize,
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Defaults to 1e-4.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Defaults to 30 for classification, 20 for forecasting.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Early-stopping patience; 0 disables early stopping.
    #[arg(long)]
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ForecastArgs {
    /// Look-back length H.
    #[arg(long, default_value_t = 96)]
    pub lookback: usize,
    /// Horizon T'.
    #[arg(long, default_value_t = 24)]
    pub horizon: usize,
    /// Stride between training windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Stride between validation and test windows; defaults to `--stride`.
    #[arg(long)]
    pub eval_stride: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, env = "TSIMG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub imaging: ImagingArgs,
    #[arg(long, default_value_t = 0)]
    pub variate: usize,
    /// First time step rendered.
    #[arg(long, default_value_t = 0)]
    pub start: usize,
    /// Steps rendered; the rest of the series when absent.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, env = "TSIMG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output PGM; the pixel CSV goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub imaging: ImagingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`; its run directory supplies the config.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    #[arg(long)]
    pub perturb: Option<PerturbKind>,
    /// Perturbation seed.
    #[arg(long, env = "TSIMG_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Also write the metrics table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub imaging: ImagingArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub forecast: ForecastArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Segment sweep denominator.
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Segment sweep runs i = 1..=i-max.
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
    pub i_max: u64,
    /// Look-back lengths; the long-window study's lengths when absent.
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub i_max: u64,
    /// Emit every k from 1 up to `--k`.
    #[arg(long)]
    pub all_k: bool,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}
