use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Rasterises `x` as a polyline: time left to right, the maximum on the
/// top row. Foreground pixels are 1.0, background 0.0. A constant series
/// is drawn on the middle row.
pub fn lineplot_raster(x: &[f64], height: usize, width: usize, thickness: usize) -> Result<GrayImage> {
    if height < 2 || width < 2 {
        return Err(Error::InvalidArgument(format!(
            "line plot needs at least 2x2 pixels, got {height}x{width}"
        )));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let thickness = thickness.max(1);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let to_row = |v: f64| -> i64 {
        if max == min {
            ((height - 1) / 2) as i64
        } else {
            ((max - v) / (max - min) * (height - 1) as f64).round() as i64
        }
    };
    let to_col = |t: usize| -> i64 {
        if x.len() == 1 {
            0
        } else {
            (t as f64 * (width - 1) as f64 / (x.len() - 1) as f64).round() as i64
        }
    };

    let mut img = GrayImage::filled(height, width, 0.0);
    let lo = -((thickness as i64 - 1) / 2);
    let hi = thickness as i64 / 2;
    let mut plot = |r: i64, c: i64| {
        for dr in lo..=hi {
            for dc in lo..=hi {
                let (rr, cc) = (r + dr, c + dc);
                if (0..height as i64).contains(&rr) && (0..width as i64).contains(&cc) {
                    img.set(rr as usize, cc as usize, 1.0);
                }
            }
        }
    };

    let points: Vec<(i64, i64)> = x.iter().enumerate().map(|(t, &v)| (to_row(v), to_col(t))).collect();
    plot(points[0].0, points[0].1);
    for w in points.windows(2) {
        bresenham(w[0], w[1], &mut plot);
    }
    Ok(img)
}

fn bresenham((r0, c0): (i64, i64), (r1, c1): (i64, i64), plot: &mut impl FnMut(i64, i64)) {
    let dc = (c1 - c0).abs();
    let dr = -(r1 - r0).abs();
    let sc = if c0 < c1 { 1 } else { -1 };
    let sr = if r0 < r1 { 1 } else { -1 };
    let (mut r, mut c) = (r0, c0);
    let mut err = dc + dr;
    loop {
        plot(r, c);
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dr {
            err += dr;
            c += sc;
        }
        if e2 <= dc {
            err += dc;
            r += sr;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashSet, VecDeque};

    #[test]
    fn constant_is_midline() {
        let img = lineplot_raster(&[2.0; 10], 9, 20, 1).unwrap();
        for r in 0..9 {
            let expect = if r == 4 { 1.0 } else { 0.0 };
            assert!(img.row(r).iter().all(|&v| v == expect), "row {r}");
        }
    }

    #[test]
    fn diagonal_is_eight_connected() {
        let img = lineplot_raster(&[0.0, 1.0], 10, 17, 1).unwrap();
        assert_eq!(img.get(9, 0), 1.0);
        assert_eq!(img.get(0, 16), 1.0);
        // BFS over foreground with 8-neighbourhood.
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(9i64, 0i64)]);
        while let Some((r, c)) = queue.pop_front() {
            if !seen.insert((r, c)) {
                continue;
            }
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (rr, cc) = (r + dr, c + dc);
                    if (0..10).contains(&rr) && (0..17).contains(&cc) && img.get(rr as usize, cc as usize) == 1.0 {
                        queue.push_back((rr, cc));
                    }
                }
            }
        }
        assert!(seen.contains(&(0, 16)));
    }

    #[test]
    fn binary_pixels() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let img = lineplot_raster(&x, 32, 32, 1).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 0.0 || v == 1.0));
        let thick = lineplot_raster(&x, 32, 32, 3).unwrap();
        let count = |i: &GrayImage| i.pixels().iter().filter(|&&v| v == 1.0).count();
        assert!(count(&thick) > count(&img));
        assert!(lineplot_raster(&x, 1, 32, 1).is_err());
    }
}
