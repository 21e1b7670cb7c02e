//! Series-to-image transforms and FFT period detection.
//!
//! All transforms are deterministic. Univariate methods take a value slice;
//! [`mvh`] takes the whole multivariate series.

mod gaf;
mod heatmap;
mod lineplot;
mod period;
mod recurrence;
mod spectral;

pub use gaf::{gaf, gaf_diag_inverse, GafContext};
pub use heatmap::{mvh, uvh, uvh_inverse, uvh_padding};
pub use lineplot::lineplot_raster;
pub use period::{detect_period, PeriodEstimate};
pub use recurrence::recurrence_plot;
pub use spectral::{
    filterbank_spectrogram, stft_spectrogram, triangular_filters, wavelet_scalogram, wavelet_scales,
    MORLET_OMEGA0,
};
