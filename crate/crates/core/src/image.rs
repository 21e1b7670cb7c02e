use crate::error::{Error, Result};

/// Single-channel real image, row-major. Row 0 is the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions {height}x{width} must be positive"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::LengthMismatch {
                expected: height * width,
                found: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch("ragged image rows".into()));
        }
        Self::new(rows.len(), width, rows.concat())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.height).map(|r| self.get(r, col)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.pixels.chunks(self.width).map(<[f64]>::to_vec).collect()
    }
}
