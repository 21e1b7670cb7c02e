//! Time-frequency images: STFT, linear triangular filterbank, Morlet CWT.

use std::f64::consts::{PI, TAU};

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Centre frequency of the Morlet mother wavelet.
pub const MORLET_OMEGA0: f64 = 6.0;

/// Magnitude STFT frames: `frames[t][k] = |Σ w_n x_{t·hop+n} e^{-2πikn/N}|`.
fn stft_magnitudes(x: &[f64], window_len: usize, hop: usize) -> Result<Vec<Vec<f64>>> {
    if window_len == 0 || hop == 0 {
        return Err(Error::InvalidArgument("window and hop must be positive".into()));
    }
    if window_len > x.len() {
        return Err(Error::WindowTooLong {
            window: window_len,
            len: x.len(),
        });
    }
    // Periodic Hann window.
    let window: Vec<f64> = (0..window_len)
        .map(|n| 0.5 - 0.5 * (TAU * n as f64 / window_len as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let frames = (x.len() - window_len) / hop + 1;
    let bins = window_len / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    Ok((0..frames)
        .map(|f| {
            let start = f * hop;
            for (n, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(x[start + n] * window[n], 0.0);
            }
            fft.process(&mut buf);
            buf[..bins].iter().map(|c| c.norm()).collect()
        })
        .collect())
}

/// Log-magnitude spectrogram, `log(1 + |S|)`. Row `k` is frequency bin `k`,
/// column `t` is frame `t`.
pub fn stft_spectrogram(x: &[f64], window_len: usize, hop: usize) -> Result<GrayImage> {
    let frames = stft_magnitudes(x, window_len, hop)?;
    let bins = window_len / 2 + 1;
    let mut img = GrayImage::filled(bins, frames.len(), 0.0);
    for (t, frame) in frames.iter().enumerate() {
        for (k, m) in frame.iter().enumerate() {
            img.set(k, t, m.ln_1p());
        }
    }
    Ok(img)
}

/// Triangular filters with centres evenly spaced on the linear bin axis.
/// `weights[j][k]` is filter `j` at bin `k`; adjacent filters overlap so
/// that weights sum to one between the first and last centre.
pub fn triangular_filters(bins: usize, n_filters: usize) -> Vec<Vec<f64>> {
    let top = (bins - 1) as f64;
    let spacing = top / (n_filters + 1) as f64;
    (0..n_filters)
        .map(|j| {
            let lo = j as f64 * spacing;
            let mid = lo + spacing;
            let hi = mid + spacing;
            (0..bins)
                .map(|k| {
                    let f = k as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / spacing
                    } else {
                        (hi - f) / spacing
                    }
                })
                .collect()
        })
        .collect()
}

/// Filterbank energies of the STFT magnitudes, log-compressed. Row `j` is
/// filter `j` (low to high frequency).
pub fn filterbank_spectrogram(
    x: &[f64],
    window_len: usize,
    hop: usize,
    n_filters: usize,
) -> Result<GrayImage> {
    if n_filters == 0 {
        return Err(Error::InvalidArgument("n_filters must be at least 1".into()));
    }
    let frames = stft_magnitudes(x, window_len, hop)?;
    let bins = window_len / 2 + 1;
    if bins < 2 {
        return Err(Error::InvalidArgument("window too short for a filterbank".into()));
    }
    let filters = triangular_filters(bins, n_filters);
    let mut img = GrayImage::filled(n_filters, frames.len(), 0.0);
    for (t, frame) in frames.iter().enumerate() {
        for (j, w) in filters.iter().enumerate() {
            let e: f64 = w.iter().zip(frame).map(|(a, b)| a * b).sum();
            img.set(j, t, e.ln_1p());
        }
    }
    Ok(img)
}

/// Scales `s_j = 2·2^{j/4}`: four voices per octave. The smallest scale
/// keeps the Morlet carrier `ω₀/s` below the Nyquist frequency.
pub fn wavelet_scales(num_scales: usize) -> Vec<f64> {
    (0..num_scales).map(|j| 2.0 * 2f64.powf(j as f64 / 4.0)).collect()
}

/// Morlet continuous wavelet transform magnitudes, `|W(s_j, t)|`.
///
/// Uses `1/s` normalisation so a unit sinusoid peaks at the same height at
/// every scale; the peak sits at `s = ω₀·P / 2π` for period `P`. Row `j`
/// corresponds to [`wavelet_scales`]`[j]`. The signal is zero-extended.
pub fn wavelet_scalogram(x: &[f64], num_scales: usize) -> Result<GrayImage> {
    if num_scales == 0 {
        return Err(Error::InvalidArgument("num_scales must be at least 1".into()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let norm = PI.powf(-0.25);
    let t_len = x.len() as isize;
    let mut img = GrayImage::filled(num_scales, x.len(), 0.0);
    for (j, &s) in wavelet_scales(num_scales).iter().enumerate() {
        let half = (4.0 * s).ceil() as isize;
        let kernel: Vec<Complex<f64>> = (-half..=half)
            .map(|m| {
                let u = m as f64 / s;
                let env = norm * (-0.5 * u * u).exp() / s;
                Complex::from_polar(env, MORLET_OMEGA0 * u)
            })
            .collect();
        for t in 0..t_len {
            let mut acc = Complex::new(0.0, 0.0);
            let lo = (-half).max(-t);
            let hi = half.min(t_len - 1 - t);
            for m in lo..=hi {
                // ψ*((n − t)/s) with n = t + m
                acc += x[(t + m) as usize] * kernel[(m + half) as usize].conj();
            }
            img.set(j, t as usize, acc.norm());
        }
    }
    Ok(img)
}
