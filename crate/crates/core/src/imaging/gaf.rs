use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Min-max bounds used to scale a series before the angular encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GafContext {
    pub min: f64,
    pub max: f64,
    /// `max == min`; every scaled value was set to 0.5.
    pub degenerate: bool,
}

/// Gramian angular summation field: `G[i][j] = cos(φ_i + φ_j)` with
/// `φ = arccos(x̂)` and `x̂` min-max scaled into `[0, 1]`.
pub fn gaf(x: &[f64]) -> Result<(GrayImage, GafContext)> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = max == min;
    let scaled: Vec<f64> = if degenerate {
        vec![0.5; x.len()]
    } else {
        x.iter()
            .map(|v| ((v - min) / (max - min)).clamp(0.0, 1.0))
            .collect()
    };
    let sines: Vec<f64> = scaled.iter().map(|s| (1.0 - s * s).max(0.0).sqrt()).collect();
    let n = x.len();
    let mut px = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (scaled[i] * scaled[j] - sines[i] * sines[j]).clamp(-1.0, 1.0);
            px[i * n + j] = v;
            px[j * n + i] = v;
        }
    }
    Ok((
        GrayImage::new(n, n, px)?,
        GafContext {
            min,
            max,
            degenerate,
        },
    ))
}

/// Recovers values from the diagonal `G[i][i] = 2x̂_i² − 1`. Outputs always
/// lie inside `[ctx.min, ctx.max]`.
pub fn gaf_diag_inverse(img: &GrayImage, ctx: &GafContext) -> Result<Vec<f64>> {
    if !img.is_square() {
        return Err(Error::NotSquare {
            height: img.height(),
            width: img.width(),
        });
    }
    Ok((0..img.height())
        .map(|i| {
            let g = img.get(i, i).clamp(-1.0, 1.0);
            let s = ((g + 1.0) / 2.0).sqrt();
            ctx.min + s * (ctx.max - ctx.min)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extremes() {
        let (g, ctx) = gaf(&[0.0, 1.0]).unwrap();
        assert_eq!(g.get(1, 1), 1.0);
        assert_eq!(g.get(0, 0), -1.0);
        assert_eq!((ctx.min, ctx.max), (0.0, 1.0));
        let ctx = GafContext { min: -3.0, max: 5.0, degenerate: false };
        let img = GrayImage::new(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(gaf_diag_inverse(&img, &ctx).unwrap(), vec![5.0, -3.0]);
    }

    #[test]
    fn degenerate_range_uses_midpoint() {
        let (g, ctx) = gaf(&[4.0; 3]).unwrap();
        assert!(ctx.degenerate);
        // cos(2 * arccos(0.5)) = 2 * 0.25 - 1
        assert!((g.get(0, 2) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_square_rejected() {
        let img = GrayImage::filled(2, 3, 0.0);
        let ctx = GafContext { min: 0.0, max: 1.0, degenerate: false };
        assert!(matches!(gaf_diag_inverse(&img, &ctx), Err(Error::NotSquare { .. })));
    }

    proptest! {
        #[test]
        fn field_properties(x in prop::collection::vec(-100.0f64..100.0, 2..60)) {
            let (g, ctx) = gaf(&x).unwrap();
            let n = x.len();
            for i in 0..n {
                let xh = if ctx.degenerate { 0.5 } else { (x[i] - ctx.min) / (ctx.max - ctx.min) };
                // Direct angular formula against the algebraic expansion.
                let phi = xh.acos();
                prop_assert!((g.get(i, i) - (2.0 * xh * xh - 1.0)).abs() < 1e-12);
                prop_assert!((g.get(i, i) - (2.0 * phi).cos()).abs() < 1e-9);
                for j in 0..n {
                    prop_assert_eq!(g.get(i, j), g.get(j, i));
                    prop_assert!((-1.0..=1.0).contains(&g.get(i, j)));
                }
            }
            if !ctx.degenerate {
                let back = gaf_diag_inverse(&g, &ctx).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + ctx.max - ctx.min));
                }
            }
        }
    }
}
