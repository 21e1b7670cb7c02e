use std::cmp::Ordering;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Candidate periods from the amplitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodEstimate {
    /// Distinct periods `⌈T/f⌉`, by descending amplitude of `f`.
    pub top_periods: Vec<usize>,
    pub chosen_l: usize,
    /// Frequency index with the largest amplitude.
    pub dominant_frequency: usize,
    /// Set when the spectrum is flat (constant input).
    pub degenerate: bool,
}

/// Finds the dominant period of `x` by FFT amplitude over `f ∈ [1, ⌊T/2⌋]`.
///
/// Ties go to the lower frequency. A flat spectrum yields `f = 1`, `L = T`
/// and the degenerate flag.
pub fn detect_period(x: &[f64], top_k: usize) -> Result<PeriodEstimate> {
    let t = x.len();
    if t < 4 {
        return Err(Error::SeriesTooShort { len: t, min: 4 });
    }
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);

    let amps: Vec<(usize, f64)> = (1..=t / 2).map(|f| (f, buf[f].norm())).collect();
    let scale = x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let max_amp = amps.iter().map(|a| a.1).fold(0.0, f64::max);
    if max_amp <= 1e-9 * scale {
        return Ok(PeriodEstimate {
            top_periods: vec![t],
            chosen_l: t,
            dominant_frequency: 1,
            degenerate: true,
        });
    }

    let mut ranked = amps;
    // Stable sort keeps ascending frequency order among equal amplitudes.
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let period_of = |f: usize| t.div_ceil(f);
    let mut top_periods = Vec::with_capacity(top_k);
    for &(f, _) in &ranked {
        let p = period_of(f);
        if !top_periods.contains(&p) {
            top_periods.push(p);
            if top_periods.len() == top_k {
                break;
            }
        }
    }
    let dominant_frequency = ranked[0].0;
    Ok(PeriodEstimate {
        top_periods,
        chosen_l: period_of(dominant_frequency),
        dominant_frequency,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{gen_periodic, Waveform};
    use std::f64::consts::TAU;

    /// Naive O(T²) DFT amplitude, independent of the FFT path.
    fn dft_amplitude(x: &[f64], f: usize) -> f64 {
        let t = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            let ang = TAU * f as f64 * n as f64 / t;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        re.hypot(im)
    }

    #[test]
    fn pure_sine_period_24() {
        let x = gen_periodic(24, 1152, Waveform::Sine, 0, 0.0).unwrap();
        let est = detect_period(x.values(), 3).unwrap();
        let oracle = (1..=576)
            .max_by(|&a, &b| {
                dft_amplitude(x.values(), a)
                    .partial_cmp(&dft_amplitude(x.values(), b))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(oracle, 48);
        assert_eq!(est.dominant_frequency, 48);
        assert_eq!(est.chosen_l, 24);
    }

    #[test]
    fn hourly_style_top_three() {
        // Daily cycle plus two slow cycles at f = 2 and f = 3 of a 1152 window.
        let x: Vec<f64> = (0..1152)
            .map(|n| {
                let n = n as f64;
                3.0 * (TAU * n / 24.0).sin()
                    + 2.0 * (TAU * 2.0 * n / 1152.0).cos()
                    + 1.5 * (TAU * 3.0 * n / 1152.0).sin()
            })
            .collect();
        let est = detect_period(&x, 3).unwrap();
        assert_eq!(est.top_periods, vec![24, 576, 384]);
        assert_eq!(est.chosen_l, 24);
    }

    #[test]
    fn constant_is_degenerate() {
        let est = detect_period(&[2.5; 50], 3).unwrap();
        assert!(est.degenerate);
        assert_eq!((est.dominant_frequency, est.chosen_l), (1, 50));
    }

    #[test]
    fn generated_series_recover_their_period() {
        for (p, t) in [(12usize, 240usize), (24, 96), (7, 700), (50, 1000)] {
            for wf in [Waveform::Sine, Waveform::Composite] {
                let x = gen_periodic(p, t, wf, 0, 0.0).unwrap();
                assert_eq!(detect_period(x.values(), 1).unwrap().chosen_l, p, "p={p} t={t} {wf:?}");
            }
        }
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(detect_period(&[1.0, 2.0, 3.0], 1), Err(Error::SeriesTooShort { .. })));
    }
}
