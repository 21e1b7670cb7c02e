use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Unthresholded recurrence plot: Euclidean distances between the
/// delay-embedded states `v_i = (x_i, x_{i+τ}, …, x_{i+(m−1)τ})`.
pub fn recurrence_plot(x: &[f64], embed_dim: usize, delay: usize) -> Result<GrayImage> {
    if embed_dim == 0 || delay == 0 {
        return Err(Error::InvalidArgument(
            "embedding dimension and delay must be at least 1".into(),
        ));
    }
    let span = (embed_dim - 1) * delay;
    if x.len() <= span {
        return Err(Error::EmbeddingTooLarge {
            len: x.len(),
            embed_dim,
            delay,
        });
    }
    let n = x.len() - span;
    let mut px = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (0..embed_dim)
                .map(|k| {
                    let diff = x[i + k * delay] - x[j + k * delay];
                    diff * diff
                })
                .sum::<f64>()
                .sqrt();
            px[i * n + j] = d;
            px[j * n + i] = d;
        }
    }
    GrayImage::new(n, n, px)
}
