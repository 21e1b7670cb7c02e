//! Routing of imaging methods to the three model frameworks, and the
//! window → example conversions each framework trains on.
//!
//! * classification probe: one image per variate (a single image for MVH),
//!   pooled token embeddings, linear head;
//! * linear forecasting head: each variate forecast independently (MVH
//!   forecasts all variates at once) from instance-normalized windows;
//! * masked reconstruction: UVH/MVH images with the horizon appended as
//!   masked columns.

use std::fmt;
use std::str::FromStr;

use crate::alignment::{resize_bilinear, standardize_image};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::image::GrayImage;
use crate::imaging::{
    detect_period, filterbank_spectrogram, gaf, lineplot_raster, recurrence_plot, stft_spectrogram,
    uvh, wavelet_scalogram,
};
use crate::models::{predict_forecast, Arch, Example, Model, ModelConfig, ReconLayout, TaskKind};
use crate::series::{mean_std, WindowSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImagingMethod {
    LinePlot,
    Mvh,
    Uvh,
    Stft,
    Wavelet,
    Filterbank,
    Gaf,
    Rp,
}

impl ImagingMethod {
    pub const ALL: [ImagingMethod; 8] = [
        Self::LinePlot,
        Self::Mvh,
        Self::Uvh,
        Self::Stft,
        Self::Wavelet,
        Self::Filterbank,
        Self::Gaf,
        Self::Rp,
    ];

    /// Only the heatmaps keep raw values in pixels.
    pub fn preserves_values(self) -> bool {
        matches!(self, Self::Uvh | Self::Mvh)
    }

    /// MVH renders all variates into one image.
    pub fn is_multivariate(self) -> bool {
        self == Self::Mvh
    }
}

impl fmt::Display for ImagingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinePlot => "lineplot",
            Self::Mvh => "mvh",
            Self::Uvh => "uvh",
            Self::Stft => "stft",
            Self::Wavelet => "wavelet",
            Self::Filterbank => "filterbank",
            Self::Gaf => "gaf",
            Self::Rp => "rp",
        })
    }
}

impl FromStr for ImagingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown imaging method {s:?}")))
    }
}

/// Per-method knobs. `None` entries fall back to data-dependent defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingParams {
    /// UVH segment length; detected by FFT when absent.
    pub period: Option<usize>,
    /// STFT/filterbank window, default `min(64, T)`.
    pub window_len: Option<usize>,
    /// Default half the window.
    pub hop: Option<usize>,
    pub n_filters: usize,
    pub num_scales: usize,
    pub rp_embed_dim: usize,
    pub rp_delay: usize,
    pub lineplot_height: usize,
    pub lineplot_thickness: usize,
}

impl Default for ImagingParams {
    fn default() -> Self {
        Self {
            period: None,
            window_len: None,
            hop: None,
            n_filters: 32,
            num_scales: 32,
            rp_embed_dim: 1,
            rp_delay: 1,
            lineplot_height: 64,
            lineplot_thickness: 1,
        }
    }
}

/// Renders one variate. MVH of a single variate is a `1×T` image.
pub fn render(method: ImagingMethod, x: &[f64], p: &ImagingParams) -> Result<GrayImage> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let window = p.window_len.unwrap_or(x.len().min(64));
    let hop = p.hop.unwrap_or((window / 2).max(1));
    match method {
        ImagingMethod::LinePlot => {
            lineplot_raster(x, p.lineplot_height, x.len().max(2), p.lineplot_thickness)
        }
        ImagingMethod::Mvh => GrayImage::new(1, x.len(), x.to_vec()),
        ImagingMethod::Uvh => {
            let l = match p.period {
                Some(l) => l,
                None => detect_period(x, 1)?.chosen_l,
            };
            uvh(x, l)
        }
        ImagingMethod::Stft => stft_spectrogram(x, window, hop),
        ImagingMethod::Wavelet => wavelet_scalogram(x, p.num_scales),
        ImagingMethod::Filterbank => filterbank_spectrogram(x, window, hop, p.n_filters),
        ImagingMethod::Gaf => Ok(gaf(x)?.0),
        ImagingMethod::Rp => recurrence_plot(x, p.rp_embed_dim, p.rp_delay),
    }
}

/// Images of a `d × T` window: one for MVH, otherwise one per variate.
pub fn render_window(method: ImagingMethod, rows: &[Vec<f64>], p: &ImagingParams) -> Result<Vec<GrayImage>> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    if method.is_multivariate() {
        Ok(vec![GrayImage::from_rows(rows)?])
    } else {
        rows.iter().map(|r| render(method, r, p)).collect()
    }
}

/// Resize to `size × size`, then per-image standardization.
pub fn align(img: &GrayImage, size: usize) -> Result<GrayImage> {
    Ok(standardize_image(&resize_bilinear(img, size, size)?).0)
}

/// Rejects combinations the framework table does not allow.
pub fn check_routing(task: TaskKind, arch: Arch, method: ImagingMethod) -> Result<()> {
    if task != TaskKind::ForecastReconstruct {
        return Ok(());
    }
    if !method.preserves_values() {
        return Err(Error::Routing(format!(
            "forecast-reconstruct needs an imaging method that keeps raw values in pixels \
             (uvh or mvh); {method} does not, use forecast-linear instead"
        )));
    }
    if arch != Arch::MiniMae {
        return Err(Error::Routing(format!(
            "forecast-reconstruct needs a reconstruction decoder (minimae); {arch} has only a linear head"
        )));
    }
    Ok(())
}

/// A routed imaging method plus model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub method: ImagingMethod,
    pub imaging: ImagingParams,
    pub model: ModelConfig,
    /// Number of variates per window.
    pub variates: usize,
    /// Forecast horizon `T'` (ignored for classification).
    pub horizon: usize,
}

impl Pipeline {
    /// Validates routing and derives the model's image count and head
    /// width from the data shape.
    pub fn new(
        method: ImagingMethod,
        imaging: ImagingParams,
        mut model: ModelConfig,
        variates: usize,
        horizon: usize,
    ) -> Result<Self> {
        check_routing(model.task, model.arch, method)?;
        if variates == 0 {
            return Err(Error::EmptyInput);
        }
        match model.task {
            TaskKind::Classify => {
                model.num_images = if method.is_multivariate() { 1 } else { variates };
            }
            TaskKind::ForecastLinear => {
                model.horizon = if method.is_multivariate() { variates * horizon } else { horizon };
            }
            TaskKind::ForecastReconstruct => {
                model.horizon = horizon;
                if method == ImagingMethod::Uvh && imaging.period.is_none() {
                    return Err(Error::InvalidArgument(
                        "reconstruction forecasting needs a fixed UVH period".into(),
                    ));
                }
            }
        }
        if model.task != TaskKind::Classify && horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        model.validate()?;
        Ok(Self {
            method,
            imaging,
            model,
            variates,
            horizon,
        })
    }

    /// Layout of one reconstruction image for a look-back of `lookback_len`.
    pub fn recon_layout(&self, lookback_len: usize) -> Result<ReconLayout> {
        match self.method {
            ImagingMethod::Uvh => ReconLayout::uvh(
                self.imaging.period.expect("checked in Pipeline::new"),
                lookback_len,
                self.horizon,
            ),
            ImagingMethod::Mvh => ReconLayout::mvh(self.variates, lookback_len, self.horizon),
            m => Err(Error::Routing(format!("{m} cannot drive reconstruction"))),
        }
    }

    /// Future steps a training window must carry: whole horizon columns for
    /// reconstruction, `T'` otherwise.
    pub fn train_horizon(&self, lookback_len: usize) -> Result<usize> {
        match self.model.task {
            TaskKind::ForecastReconstruct => Ok(self.recon_layout(lookback_len)?.target_len()),
            _ => Ok(self.horizon),
        }
    }

    fn check_window(&self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.len() != self.variates {
            return Err(Error::ShapeMismatch(format!(
                "window has {} variates, pipeline expects {}",
                rows.len(),
                self.variates
            )));
        }
        Ok(())
    }

    /// Training examples from one labelled or forecasting window.
    pub fn examples(&self, window: &WindowSample) -> Result<Vec<Example>> {
        self.check_window(&window.lookback)?;
        let s = self.model.image_size;
        match self.model.task {
            TaskKind::Classify => {
                let label = window
                    .class_label()
                    .ok_or_else(|| Error::ShapeMismatch("classification needs a labelled window".into()))?;
                let images = render_window(self.method, &window.lookback, &self.imaging)?
                    .iter()
                    .map(|img| align(img, s))
                    .collect::<Result<Vec<_>>>()?;
                Ok(vec![Example::Classify { images, label }])
            }
            TaskKind::ForecastLinear => {
                let future = forecast_part(window)?;
                let norm: Vec<(f64, f64)> = window.lookback.iter().map(|x| instance_stats(x)).collect();
                let normalized: Vec<Vec<f64>> = window
                    .lookback
                    .iter()
                    .zip(&norm)
                    .map(|(x, &(m, sd))| x.iter().map(|v| (v - m) / sd).collect())
                    .collect();
                let target_of = |r: usize| -> Result<Vec<f64>> {
                    let f = future.get(r).ok_or(Error::EmptyInput)?;
                    if f.len() < self.horizon {
                        return Err(Error::LengthMismatch {
                            expected: self.horizon,
                            found: f.len(),
                        });
                    }
                    let (m, sd) = norm[r];
                    Ok(f[..self.horizon].iter().map(|v| (v - m) / sd).collect())
                };
                if self.method.is_multivariate() {
                    let image = align(&GrayImage::from_rows(&normalized)?, s)?;
                    let mut target = Vec::with_capacity(self.variates * self.horizon);
                    for r in 0..self.variates {
                        target.extend(target_of(r)?);
                    }
                    Ok(vec![Example::Forecast { image, target }])
                } else {
                    (0..self.variates)
                        .map(|r| {
                            Ok(Example::Forecast {
                                image: align(&render(self.method, &normalized[r], &self.imaging)?, s)?,
                                target: target_of(r)?,
                            })
                        })
                        .collect()
                }
            }
            TaskKind::ForecastReconstruct => {
                let future = forecast_part(window)?;
                let layout = self.recon_layout(window.lookback_len())?;
                let need = layout.target_len();
                if future.iter().any(|f| f.len() < need) {
                    return Err(Error::HorizonTooLong {
                        needed: need,
                        max: future.first().map_or(0, Vec::len),
                    });
                }
                let mask = layout.mask(s, self.model.patch_size)?;
                let groups: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = if self.method.is_multivariate() {
                    vec![(
                        window.lookback.clone(),
                        future.iter().map(|f| f[..need].to_vec()).collect(),
                    )]
                } else {
                    window
                        .lookback
                        .iter()
                        .zip(future)
                        .map(|(x, f)| (vec![x.clone()], vec![f[..need].to_vec()]))
                        .collect()
                };
                groups
                    .into_iter()
                    .map(|(lb, fut)| {
                        let (input, target, _) = layout.prepare(&lb, Some(&fut), s)?;
                        Ok(Example::Reconstruct {
                            input,
                            target: target.expect("future supplied"),
                            mask: mask.clone(),
                        })
                    })
                    .collect()
            }
        }
    }

    /// Examples of many windows, rendered through `exec` in input order.
    pub fn examples_batch(&self, windows: &[WindowSample], exec: Exec) -> Result<Vec<Example>> {
        let parts = exec::map_indexed(exec, windows, |_, w| self.examples(w));
        let mut out = Vec::new();
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// `d × T'` forecast for one look-back window.
    pub fn forecast(&self, model: &Model, lookback: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_window(lookback)?;
        let s = self.model.image_size;
        match self.model.task {
            TaskKind::Classify => Err(Error::Routing("a classifier does not forecast".into())),
            TaskKind::ForecastLinear => {
                let norm: Vec<(f64, f64)> = lookback.iter().map(|x| instance_stats(x)).collect();
                let normalized: Vec<Vec<f64>> = lookback
                    .iter()
                    .zip(&norm)
                    .map(|(x, &(m, sd))| x.iter().map(|v| (v - m) / sd).collect())
                    .collect();
                let denorm = |vals: &[f64], (m, sd): (f64, f64)| -> Vec<f64> {
                    vals.iter().map(|v| v * sd + m).collect()
                };
                if self.method.is_multivariate() {
                    let out = model.forecast(&align(&GrayImage::from_rows(&normalized)?, s)?)?;
                    Ok(out
                        .chunks(self.horizon)
                        .zip(&norm)
                        .map(|(c, &st)| denorm(c, st))
                        .collect())
                } else {
                    normalized
                        .iter()
                        .zip(&norm)
                        .map(|(x, &st)| {
                            let out = model.forecast(&align(&render(self.method, x, &self.imaging)?, s)?)?;
                            Ok(denorm(&out, st))
                        })
                        .collect()
                }
            }
            TaskKind::ForecastReconstruct => {
                let layout = self.recon_layout(lookback[0].len())?;
                if self.method.is_multivariate() {
                    predict_forecast(model, &layout, lookback)
                } else {
                    lookback
                        .iter()
                        .map(|x| Ok(predict_forecast(model, &layout, std::slice::from_ref(x))?.remove(0)))
                        .collect()
                }
            }
        }
    }

    /// Predicted class of one window.
    pub fn classify(&self, model: &Model, lookback: &[Vec<f64>]) -> Result<usize> {
        self.check_window(lookback)?;
        let images = render_window(self.method, lookback, &self.imaging)?
            .iter()
            .map(|img| align(img, self.model.image_size))
            .collect::<Result<Vec<_>>>()?;
        model.predict_class(&images)
    }
}

fn forecast_part(window: &WindowSample) -> Result<&[Vec<f64>]> {
    window
        .forecast()
        .ok_or_else(|| Error::ShapeMismatch("forecasting needs a window with a future".into()))
}

/// Look-back mean and std; a flat window keeps unit scale.
fn instance_stats(x: &[f64]) -> (f64, f64) {
    let (m, sd) = mean_std(x);
    (m, if sd > 1e-12 { sd } else { 1.0 })
}
