//! Resizing, per-image standardization, channel replication, patching and
//! the forecast mask layout.

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Bilinear resize with half-pixel centres, `src = (dst + 0.5)·in/out − 0.5`,
/// clamped to the border. No antialiasing.
pub fn resize_bilinear(img: &GrayImage, out_h: usize, out_w: usize) -> Result<GrayImage> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("output size must be positive".into()));
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let ratio = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|d| {
                let src = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = src.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, src - i0 as f64)
            })
            .collect()
    };
    let rows = taps(img.height(), out_h);
    let cols = taps(img.width(), out_w);
    let mut px = Vec::with_capacity(out_h * out_w);
    for &(r0, r1, wr) in &rows {
        for &(c0, c1, wc) in &cols {
            let top = img.get(r0, c0) * (1.0 - wc) + img.get(r0, c1) * wc;
            let bottom = img.get(r1, c0) * (1.0 - wc) + img.get(r1, c1) * wc;
            px.push(top * (1.0 - wr) + bottom * wr);
        }
    }
    GrayImage::new(out_h, out_w, px)
}

/// Mean and population std removed by [`standardize_image`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats {
    pub mean: f64,
    pub std: f64,
    pub degenerate: bool,
}

impl ImageStats {
    pub fn of(img: &GrayImage) -> Self {
        let (mean, std) = crate::series::mean_std(img.pixels());
        Self {
            mean,
            std,
            degenerate: std == 0.0,
        }
    }

    pub fn apply(&self, img: &GrayImage) -> GrayImage {
        let mut out = img.clone();
        for v in out.pixels_mut() {
            *v = if self.degenerate {
                0.0
            } else {
                (*v - self.mean) / self.std
            };
        }
        out
    }

    pub fn invert(&self, img: &GrayImage) -> GrayImage {
        let mut out = img.clone();
        let scale = if self.degenerate { 0.0 } else { self.std };
        for v in out.pixels_mut() {
            *v = *v * scale + self.mean;
        }
        out
    }
}

/// `(I − mean(I)) / std(I)`. A constant image maps to zeros with the
/// degenerate flag set.
pub fn standardize_image(img: &GrayImage) -> (GrayImage, ImageStats) {
    let stats = ImageStats::of(img);
    (stats.apply(img), stats)
}

/// Square image replicated into three identical channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedImage {
    channels: [GrayImage; 3],
    pub source_size: (usize, usize),
}

impl AlignedImage {
    pub fn size(&self) -> usize {
        self.channels[0].height()
    }

    pub fn channels(&self) -> &[GrayImage; 3] {
        &self.channels
    }

    /// Mean of the three channels.
    pub fn to_gray(&self) -> GrayImage {
        let mut out = self.channels[0].clone();
        for (i, v) in out.pixels_mut().iter_mut().enumerate() {
            let [a, b, c] = &self.channels;
            *v = (a.pixels()[i] + b.pixels()[i] + c.pixels()[i]) / 3.0;
        }
        out
    }
}

pub fn replicate_channels(img: &GrayImage) -> Result<AlignedImage> {
    if !img.is_square() {
        return Err(Error::NotSquare {
            height: img.height(),
            width: img.width(),
        });
    }
    Ok(AlignedImage {
        channels: [img.clone(), img.clone(), img.clone()],
        source_size: (img.height(), img.width()),
    })
}

/// Flattened patches in row-major grid order. Each patch vector holds the
/// three channels one after another, each row-major, so its length is `3P²`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    pub patches: Vec<Vec<f64>>,
    pub grid: (usize, usize),
    pub patch_size: usize,
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }
}

pub fn patchify(img: &AlignedImage, patch: usize) -> Result<PatchSequence> {
    let s = img.size();
    if patch == 0 || s % patch != 0 {
        return Err(Error::IndivisiblePatch { size: s, patch });
    }
    let g = s / patch;
    let mut patches = Vec::with_capacity(g * g);
    for pr in 0..g {
        for pc in 0..g {
            let mut v = Vec::with_capacity(3 * patch * patch);
            for ch in &img.channels {
                for r in 0..patch {
                    let row = ch.row(pr * patch + r);
                    v.extend_from_slice(&row[pc * patch..(pc + 1) * patch]);
                }
            }
            patches.push(v);
        }
    }
    Ok(PatchSequence {
        patches,
        grid: (g, g),
        patch_size: patch,
    })
}

pub fn unpatchify(seq: &PatchSequence) -> Result<AlignedImage> {
    let (gr, gc) = seq.grid;
    let p = seq.patch_size;
    if gr != gc || gr == 0 || p == 0 || seq.patches.len() != gr * gc {
        return Err(Error::ShapeMismatch(format!(
            "grid {:?} with {} patches",
            seq.grid,
            seq.patches.len()
        )));
    }
    let dim = 3 * p * p;
    if let Some(bad) = seq.patches.iter().find(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch(format!(
            "patch length {} (expected {dim})",
            bad.len()
        )));
    }
    let s = gr * p;
    let mut channels: [GrayImage; 3] = std::array::from_fn(|_| GrayImage::filled(s, s, 0.0));
    for (idx, v) in seq.patches.iter().enumerate() {
        let (pr, pc) = (idx / gc, idx % gc);
        for (ch, img) in channels.iter_mut().enumerate() {
            for r in 0..p {
                for c in 0..p {
                    img.set(pr * p + r, pc * p + c, v[ch * p * p + r * p + c]);
                }
            }
        }
    }
    Ok(AlignedImage {
        channels,
        source_size: (s, s),
    })
}

/// Patches hidden from the reconstruction model: every patch whose column
/// span reaches into the horizon region `[boundary_col, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMask {
    pub masked_patch_indices: Vec<usize>,
    pub boundary_col: usize,
    pub grid: (usize, usize),
}

impl ForecastMask {
    pub fn is_masked(&self, patch: usize) -> bool {
        self.masked_patch_indices.binary_search(&patch).is_ok()
    }

    /// Per-patch mask flags in grid order.
    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.grid.0 * self.grid.1];
        for &i in &self.masked_patch_indices {
            f[i] = true;
        }
        f
    }

    pub fn empty(grid: (usize, usize)) -> Self {
        Self {
            masked_patch_indices: Vec::new(),
            boundary_col: grid.1,
            grid,
        }
    }
}

/// Mask for an image whose first `lookback_cols` source columns are history
/// and the next `horizon_cols` the forecast region, after resizing to `S×S`.
pub fn build_forecast_mask(
    segment: usize,
    lookback_cols: usize,
    horizon_cols: usize,
    size: usize,
    patch: usize,
) -> Result<ForecastMask> {
    if segment == 0 {
        return Err(Error::InvalidSegmentLength);
    }
    if lookback_cols == 0 || horizon_cols == 0 {
        return Err(Error::InvalidArgument(
            "look-back and horizon must each span at least one column".into(),
        ));
    }
    if patch == 0 || size % patch != 0 {
        return Err(Error::IndivisiblePatch { size, patch });
    }
    let boundary_col =
        (size as f64 * lookback_cols as f64 / (lookback_cols + horizon_cols) as f64).round() as usize;
    let g = size / patch;
    let mut masked = Vec::new();
    for pr in 0..g {
        for pc in 0..g {
            if (pc + 1) * patch > boundary_col && boundary_col < size {
                masked.push(pr * g + pc);
            }
        }
    }
    Ok(ForecastMask {
        masked_patch_indices: masked,
        boundary_col,
        grid: (g, g),
    })
}
