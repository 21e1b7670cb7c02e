//! Forecasting by masked reconstruction: the horizon is laid out as extra
//! image columns, hidden behind the forecast mask, and read back from the
//! reconstructed pixels.

use super::network::Model;
use crate::alignment::{
    build_forecast_mask, patchify, replicate_channels, resize_bilinear, unpatchify, ForecastMask,
    ImageStats, PatchSequence,
};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::imaging::uvh_padding;

/// Anything that fills masked patches of a patch sequence.
pub trait Reconstructor {
    fn image_size(&self) -> usize;
    fn patch_size(&self) -> usize;
    fn reconstruct(&self, seq: &PatchSequence, mask: &ForecastMask) -> Result<PatchSequence>;
}

impl Reconstructor for Model {
    fn image_size(&self) -> usize {
        self.config.image_size
    }

    fn patch_size(&self) -> usize {
        self.config.patch_size
    }

    fn reconstruct(&self, seq: &PatchSequence, mask: &ForecastMask) -> Result<PatchSequence> {
        Model::reconstruct(self, seq, mask)
    }
}

/// Source-image geometry of a look-back window plus its horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconLayout {
    /// One variate folded into `period`-row columns; the horizon takes
    /// `⌈horizon / period⌉` extra columns.
    Uvh {
        period: usize,
        lookback_len: usize,
        horizon: usize,
    },
    /// Variates on rows, one column per time step.
    Mvh {
        variates: usize,
        lookback_len: usize,
        horizon: usize,
    },
}

impl ReconLayout {
    pub fn uvh(period: usize, lookback_len: usize, horizon: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidSegmentLength);
        }
        if lookback_len < period {
            return Err(Error::SeriesTooShort {
                len: lookback_len,
                min: period,
            });
        }
        Self::Uvh {
            period,
            lookback_len,
            horizon,
        }
        .checked()
    }

    pub fn mvh(variates: usize, lookback_len: usize, horizon: usize) -> Result<Self> {
        if variates == 0 || lookback_len == 0 {
            return Err(Error::EmptyInput);
        }
        Self::Mvh {
            variates,
            lookback_len,
            horizon,
        }
        .checked()
    }

    /// The horizon may occupy at most as many columns as the look-back.
    fn checked(self) -> Result<Self> {
        if self.horizon() == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if self.horizon_cols() > self.lookback_cols() {
            return Err(Error::HorizonTooLong {
                needed: self.horizon_cols(),
                max: self.lookback_cols(),
            });
        }
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        match *self {
            Self::Uvh { horizon, .. } | Self::Mvh { horizon, .. } => horizon,
        }
    }

    pub fn lookback_len(&self) -> usize {
        match *self {
            Self::Uvh { lookback_len, .. } | Self::Mvh { lookback_len, .. } => lookback_len,
        }
    }

    /// Variates consumed per window.
    pub fn variates(&self) -> usize {
        match *self {
            Self::Uvh { .. } => 1,
            Self::Mvh { variates, .. } => variates,
        }
    }

    pub fn rows(&self) -> usize {
        match *self {
            Self::Uvh { period, .. } => period,
            Self::Mvh { variates, .. } => variates,
        }
    }

    pub fn lookback_cols(&self) -> usize {
        match *self {
            Self::Uvh {
                period,
                lookback_len,
                ..
            } => lookback_len.div_ceil(period),
            Self::Mvh { lookback_len, .. } => lookback_len,
        }
    }

    pub fn horizon_cols(&self) -> usize {
        match *self {
            Self::Uvh {
                period, horizon, ..
            } => horizon.div_ceil(period),
            Self::Mvh { horizon, .. } => horizon,
        }
    }

    pub fn total_cols(&self) -> usize {
        self.lookback_cols() + self.horizon_cols()
    }

    fn check_variates(&self, x: &[Vec<f64>], len: usize) -> Result<()> {
        if x.len() != self.variates() {
            return Err(Error::ShapeMismatch(format!(
                "{} variates for a layout of {}",
                x.len(),
                self.variates()
            )));
        }
        if let Some(bad) = x.iter().find(|v| v.len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                found: bad.len(),
            });
        }
        Ok(())
    }

    /// Source image of `lookback` followed by `future`. Without a future,
    /// horizon cells hold the look-back mean.
    pub fn source_image(&self, lookback: &[Vec<f64>], future: Option<&[Vec<f64>]>) -> Result<GrayImage> {
        self.check_variates(lookback, self.lookback_len())?;
        let full_future = self.horizon_cols() * self.horizon_capacity_per_col();
        if let Some(f) = future {
            self.check_variates(f, full_future)?;
        }
        let mut img = GrayImage::filled(self.rows(), self.total_cols(), 0.0);
        match *self {
            Self::Uvh { period, .. } => {
                let x = &lookback[0];
                let pad = uvh_padding(x.len(), period);
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                let first = x[0];
                let cells = self.total_cols() * period;
                for p in 0..cells {
                    let v = if p < pad {
                        first
                    } else if p < pad + x.len() {
                        x[p - pad]
                    } else {
                        future.map_or(mean, |f| f[0][p - pad - x.len()])
                    };
                    img.set(p % period, p / period, v);
                }
            }
            Self::Mvh { lookback_len, .. } => {
                for (r, x) in lookback.iter().enumerate() {
                    let mean = x.iter().sum::<f64>() / x.len() as f64;
                    for c in 0..self.total_cols() {
                        let v = if c < lookback_len {
                            x[c]
                        } else {
                            future.map_or(mean, |f| f[r][c - lookback_len])
                        };
                        img.set(r, c, v);
                    }
                }
            }
        }
        Ok(img)
    }

    /// Values per horizon column; a horizon of `horizon_cols()` full
    /// columns spans `horizon_cols() * horizon_capacity_per_col()` steps.
    pub fn horizon_capacity_per_col(&self) -> usize {
        match *self {
            Self::Uvh { period, .. } => period,
            Self::Mvh { .. } => 1,
        }
    }

    /// Steps of future data a full-column training target needs.
    pub fn target_len(&self) -> usize {
        self.horizon_cols() * self.horizon_capacity_per_col()
    }

    /// Reads the first `horizon()` forecast values of each variate.
    pub fn read_horizon(&self, img: &GrayImage) -> Result<Vec<Vec<f64>>> {
        if img.height() != self.rows() || img.width() != self.total_cols() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} image for a {}x{} layout",
                img.height(),
                img.width(),
                self.rows(),
                self.total_cols()
            )));
        }
        Ok(match *self {
            Self::Uvh { period, .. } => {
                let start = self.lookback_cols() * period;
                vec![(start..start + self.horizon())
                    .map(|p| img.get(p % period, p / period))
                    .collect()]
            }
            Self::Mvh { lookback_len, .. } => (0..self.rows())
                .map(|r| (0..self.horizon()).map(|j| img.get(r, lookback_len + j)).collect())
                .collect(),
        })
    }

    /// Forecast mask in `size × size` coordinates.
    pub fn mask(&self, size: usize, patch: usize) -> Result<ForecastMask> {
        let seg = self.rows();
        let mask = build_forecast_mask(seg, self.lookback_cols(), self.horizon_cols(), size, patch)?;
        if mask.masked_patch_indices.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(mask)
    }

    /// Standardized `size × size` model input, the matching standardized
    /// target (when `future` is given) and the statistics used.
    pub fn prepare(
        &self,
        lookback: &[Vec<f64>],
        future: Option<&[Vec<f64>]>,
        size: usize,
    ) -> Result<(GrayImage, Option<GrayImage>, ImageStats)> {
        let input = resize_bilinear(&self.source_image(lookback, None)?, size, size)?;
        let stats = ImageStats::of(&input);
        let target = match future {
            Some(f) => {
                let t = resize_bilinear(&self.source_image(lookback, Some(f))?, size, size)?;
                Some(stats.apply(&t))
            }
            None => None,
        };
        Ok((stats.apply(&input), target, stats))
    }
}

/// Forecasts `layout.horizon()` steps per variate from `lookback`.
pub fn predict_forecast<R: Reconstructor + ?Sized>(
    model: &R,
    layout: &ReconLayout,
    lookback: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let (s, p) = (model.image_size(), model.patch_size());
    let (input, _, stats) = layout.prepare(lookback, None, s)?;
    let mask = layout.mask(s, p)?;
    let seq = patchify(&replicate_channels(&input)?, p)?;
    let out = model.reconstruct(&seq, &mask)?;
    let gray = stats.invert(&unpatchify(&out)?.to_gray());
    let back = resize_bilinear(&gray, layout.rows(), layout.total_cols())?;
    layout.read_horizon(&back)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Copies the last fully unmasked pixel column into every masked pixel.
    struct CopyLastColumn {
        size: usize,
        patch: usize,
    }

    impl Reconstructor for CopyLastColumn {
        fn image_size(&self) -> usize {
            self.size
        }
        fn patch_size(&self) -> usize {
            self.patch
        }
        fn reconstruct(&self, seq: &PatchSequence, mask: &ForecastMask) -> Result<PatchSequence> {
            let img = unpatchify(seq)?.to_gray();
            let g = mask.grid.1;
            let first_masked_col = (0..g)
                .find(|&pc| mask.is_masked(pc))
                .expect("non-empty mask");
            let src = first_masked_col * self.patch - 1;
            let mut out = img.clone();
            for r in 0..self.size {
                for c in first_masked_col * self.patch..self.size {
                    out.set(r, c, img.get(r, src));
                }
            }
            patchify(&replicate_channels(&out)?, self.patch)
        }
    }

    struct Identity(usize, usize);

    impl Reconstructor for Identity {
        fn image_size(&self) -> usize {
            self.0
        }
        fn patch_size(&self) -> usize {
            self.1
        }
        fn reconstruct(&self, seq: &PatchSequence, _: &ForecastMask) -> Result<PatchSequence> {
            Ok(seq.clone())
        }
    }

    fn periodic(period: usize, len: usize) -> Vec<f64> {
        (0..len)
            .map(|t| (2.0 * std::f64::consts::PI * (t % period) as f64 / period as f64).sin() + 0.3)
            .collect()
    }

    #[test]
    fn copy_column_stub_forecasts_periodic_input() {
        let (l, h, horizon) = (16, 96, 16);
        let series = periodic(l, h + horizon);
        let layout = ReconLayout::uvh(l, h, horizon).unwrap();
        let stub = CopyLastColumn { size: 16, patch: 4 };
        let pred = predict_forecast(&stub, &layout, &[series[..h].to_vec()]).unwrap();
        for (a, b) in pred[0].iter().zip(&series[h..]) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn one_horizon_column_when_horizon_equals_period() {
        let layout = ReconLayout::uvh(24, 96, 24).unwrap();
        assert_eq!(layout.horizon_cols(), 1);
        assert_eq!(ReconLayout::uvh(24, 96, 25).unwrap().horizon_cols(), 2);
        assert!(matches!(
            ReconLayout::uvh(24, 48, 72),
            Err(Error::HorizonTooLong { needed: 3, max: 2 })
        ));
    }

    #[test]
    fn identity_stub_returns_lookback_pixels() {
        let l = 8;
        let x: Vec<f64> = (0..40).map(|t| (t as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let layout = ReconLayout::uvh(l, 40, 8).unwrap();
        let stub = Identity(16, 4);
        let (input, _, stats) = layout.prepare(&[x.clone()], None, 16).unwrap();
        let seq = patchify(&replicate_channels(&input).unwrap(), 4).unwrap();
        let back = stats.invert(&unpatchify(&stub.reconstruct(&seq, &layout.mask(16, 4).unwrap()).unwrap()).unwrap().to_gray());
        let direct = resize_bilinear(&layout.source_image(&[x], None).unwrap(), 16, 16).unwrap();
        for (a, b) in back.pixels().iter().zip(direct.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn source_image_layouts() {
        let layout = ReconLayout::uvh(4, 6, 3).unwrap();
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let img = layout.source_image(&[x.clone()], Some(&[vec![7.0, 8.0, 9.0, 10.0]])).unwrap();
        // Two pad cells of the first value, then data, then the future.
        assert_eq!(img.column(0), vec![1.0, 1.0, 1.0, 2.0]);
        assert_eq!(img.column(1), vec![3.0, 4.0, 5.0, 6.0]);
        assert_eq!(img.column(2), vec![7.0, 8.0, 9.0, 10.0]);
        assert_eq!(layout.read_horizon(&img).unwrap(), vec![vec![7.0, 8.0, 9.0]]);
        let blank = layout.source_image(&[x], None).unwrap();
        assert_eq!(blank.column(2), vec![3.5; 4]);

        let m = ReconLayout::mvh(2, 3, 2).unwrap();
        let img = m
            .source_image(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], Some(&[vec![7.0, 8.0], vec![9.0, 10.0]]))
            .unwrap();
        assert_eq!(img.row(1), &[4.0, 5.0, 6.0, 9.0, 10.0]);
        assert_eq!(m.read_horizon(&img).unwrap(), vec![vec![7.0, 8.0], vec![9.0, 10.0]]);
    }
}
