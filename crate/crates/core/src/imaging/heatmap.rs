use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::series::MultivariateSeries;

/// Number of constant pad values `uvh` prepends to a length-`len` series.
pub fn uvh_padding(len: usize, segment: usize) -> usize {
    len.div_ceil(segment) * segment - len
}

/// Univariate heatmap: length-`segment` slices stacked as columns, oldest
/// on the left.
///
/// The series is left-padded with its first value up to a multiple of
/// `segment`; `pixel(r, c) = padded[c * segment + r]`.
pub fn uvh(x: &[f64], segment: usize) -> Result<GrayImage> {
    if segment == 0 {
        return Err(Error::InvalidSegmentLength);
    }
    let first = *x.first().ok_or(Error::EmptyInput)?;
    let pad = uvh_padding(x.len(), segment);
    let cols = (x.len() + pad) / segment;
    let mut img = GrayImage::filled(segment, cols, first);
    for (i, &v) in x.iter().enumerate() {
        let p = i + pad;
        img.set(p % segment, p / segment, v);
    }
    Ok(img)
}

/// Unstacks columns and drops the left pad, returning `original_len` values.
pub fn uvh_inverse(img: &GrayImage, original_len: usize) -> Result<Vec<f64>> {
    let cap = img.height() * img.width();
    if original_len > cap || original_len == 0 {
        return Err(Error::LengthMismatch {
            expected: original_len,
            found: cap,
        });
    }
    let h = img.height();
    Ok((cap - original_len..cap)
        .map(|p| img.get(p % h, p / h))
        .collect())
}

/// Multivariate heatmap: variates on rows, time on columns.
pub fn mvh(series: &MultivariateSeries) -> GrayImage {
    GrayImage::from_rows(series.rows()).expect("validated series is rectangular")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stacks_columns() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let img = uvh(&x, 4).unwrap();
        assert_eq!((img.height(), img.width()), (4, 2));
        assert_eq!(img.column(0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(img.column(1), vec![5.0, 6.0, 7.0, 8.0]);
        assert_eq!(uvh_inverse(&img, 8).unwrap(), x);
    }

    #[test]
    fn left_pads_with_first_value() {
        let x: Vec<f64> = (1..=7).map(f64::from).collect();
        let img = uvh(&x, 4).unwrap();
        assert_eq!((img.height(), img.width()), (4, 2));
        assert_eq!(img.column(0), vec![1.0, 1.0, 2.0, 3.0]);
        assert_eq!(uvh_inverse(&img, 7).unwrap(), x);
        assert_eq!(uvh_padding(7, 4), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(uvh(&[1.0], 0), Err(Error::InvalidSegmentLength)));
        let img = GrayImage::filled(2, 2, 0.0);
        assert!(matches!(uvh_inverse(&img, 5), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn mvh_is_identity_layout() {
        let s = MultivariateSeries::new(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let img = mvh(&s);
        assert_eq!((img.height(), img.width()), (2, 3));
        assert_eq!(img.to_rows(), s.rows());
        let one = MultivariateSeries::new(vec![vec![9.0; 5]]).unwrap();
        assert_eq!((mvh(&one).height(), mvh(&one).width()), (1, 5));
    }

    proptest! {
        #[test]
        fn uvh_round_trip(x in prop::collection::vec(-1e6f64..1e6, 1..200), seg in 1usize..40) {
            let img = uvh(&x, seg).unwrap();
            prop_assert_eq!(img.height(), seg);
            prop_assert_eq!(uvh_inverse(&img, x.len()).unwrap(), x.clone());
            // Every value appears exactly once plus pads equal to x[0].
            let pad = uvh_padding(x.len(), seg);
            let mut px = img.pixels().to_vec();
            let mut want = x.clone();
            want.extend(std::iter::repeat(x[0]).take(pad));
            px.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            prop_assert_eq!(px, want);
        }
    }
}
