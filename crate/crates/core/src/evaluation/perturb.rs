use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::series::MultivariateSeries;

/// Temporal perturbations applied to model inputs at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbKind {
    /// One permutation of all time steps, shared by every variate.
    SfAll,
    /// Permutes the older half `[0, ⌊T/2⌋)`.
    SfHalf,
    /// Swaps the halves; for odd `T` the first half has `⌈T/2⌉` steps.
    ExHalf,
    /// Zeroes `⌊T/2⌋` random time steps across all variates.
    Masking,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [Self::SfAll, Self::SfHalf, Self::ExHalf, Self::Masking];
}

impl fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SfAll => "sf-all",
            Self::SfHalf => "sf-half",
            Self::ExHalf => "ex-half",
            Self::Masking => "masking",
        })
    }
}

impl FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown perturbation {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbMode {
    pub kind: PerturbKind,
    pub seed: u64,
}

impl PerturbMode {
    pub fn new(kind: PerturbKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// Same kind with the seed offset for the `i`-th window of a run.
    pub fn for_window(self, i: usize) -> Self {
        Self {
            seed: self.seed.wrapping_add(i as u64),
            ..self
        }
    }
}

/// Time-step permutation or mask as an index map applied to every variate.
pub fn perturb(series: &MultivariateSeries, mode: PerturbMode) -> Result<MultivariateSeries> {
    Ok(MultivariateSeries::new(perturb_rows(series.rows(), mode)?)?)
}

/// [`perturb`] on raw `d × T` rows.
pub fn perturb_rows(rows: &[Vec<f64>], mode: PerturbMode) -> Result<Vec<Vec<f64>>> {
    let t = rows.first().map_or(0, Vec::len);
    if t < 2 {
        return Err(Error::SeriesTooShort { len: t, min: 2 });
    }
    let mut rng = seeded_rng(mode.seed);
    let reindex = |order: &[usize]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| order.iter().map(|&i| r[i]).collect())
            .collect()
    };
    Ok(match mode.kind {
        PerturbKind::SfAll => {
            let mut order: Vec<usize> = (0..t).collect();
            order.shuffle(&mut rng);
            reindex(&order)
        }
        PerturbKind::SfHalf => {
            let mut order: Vec<usize> = (0..t).collect();
            order[..t / 2].shuffle(&mut rng);
            reindex(&order)
        }
        PerturbKind::ExHalf => {
            let mut order: Vec<usize> = (0..t).collect();
            order.rotate_left(t.div_ceil(2));
            reindex(&order)
        }
        PerturbKind::Masking => {
            let hidden = index::sample(&mut rng, t, t / 2);
            let mut out = rows.to_vec();
            for i in hidden.iter() {
                for r in &mut out {
                    r[i] = 0.0;
                }
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(rows: Vec<Vec<f64>>) -> MultivariateSeries {
        MultivariateSeries::new(rows).unwrap()
    }

    #[test]
    fn ex_half_examples() {
        let s = series(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let out = perturb(&s, PerturbMode::new(PerturbKind::ExHalf, 0)).unwrap();
        assert_eq!(out.variate(0), &[3.0, 4.0, 1.0, 2.0]);
        let odd = series(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
        let out = perturb(&odd, PerturbMode::new(PerturbKind::ExHalf, 0)).unwrap();
        assert_eq!(out.variate(0), &[4.0, 5.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn too_short() {
        let s = series(vec![vec![1.0]]);
        assert!(perturb(&s, PerturbMode::new(PerturbKind::SfAll, 0)).is_err());
    }

    #[test]
    fn sf_half_keeps_newer_half() {
        let x: Vec<f64> = (0..9).map(f64::from).collect();
        let out = perturb(&series(vec![x.clone()]), PerturbMode::new(PerturbKind::SfHalf, 4)).unwrap();
        assert_eq!(&out.variate(0)[4..], &x[4..]);
    }

    fn arb_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4, 2usize..40).prop_flat_map(|(d, t)| {
            prop::collection::vec(prop::collection::vec(-100.0f64..100.0, t), d)
        })
    }

    proptest! {
        #[test]
        fn shuffles_preserve_multisets(rows in arb_rows(), seed in any::<u64>()) {
            for kind in [PerturbKind::SfAll, PerturbKind::SfHalf, PerturbKind::ExHalf] {
                let out = perturb_rows(&rows, PerturbMode::new(kind, seed)).unwrap();
                for (a, b) in rows.iter().zip(&out) {
                    let mut a = a.clone();
                    let mut b = b.clone();
                    a.sort_by(f64::total_cmp);
                    b.sort_by(f64::total_cmp);
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn sf_all_is_joint(rows in arb_rows(), seed in any::<u64>()) {
            // Tag each variate with its time index; a joint permutation keeps tags aligned.
            let t = rows[0].len();
            let tagged: Vec<Vec<f64>> = rows.iter().map(|_| (0..t).map(|i| i as f64).collect()).collect();
            let out = perturb_rows(&tagged, PerturbMode::new(PerturbKind::SfAll, seed)).unwrap();
            for r in &out[1..] {
                prop_assert_eq!(r, &out[0]);
            }
        }

        #[test]
        fn masking_counts(rows in arb_rows(), seed in any::<u64>()) {
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.abs() + 1.0).collect()).collect();
            let out = perturb_rows(&shifted, PerturbMode::new(PerturbKind::Masking, seed)).unwrap();
            let t = shifted[0].len();
            let zeros: Vec<usize> = (0..t).filter(|&i| out[0][i] == 0.0).collect();
            prop_assert_eq!(zeros.len(), t / 2);
            for r in &out {
                let z: Vec<usize> = (0..t).filter(|&i| r[i] == 0.0).collect();
                prop_assert_eq!(&z, &zeros);
            }
        }

        #[test]
        fn ex_half_even_involution(rows in arb_rows(), seed in any::<u64>()) {
            let t = rows[0].len() / 2 * 2;
            let even: Vec<Vec<f64>> = rows.iter().map(|r| r[..t].to_vec()).collect();
            let mode = PerturbMode::new(PerturbKind::ExHalf, seed);
            let twice = perturb_rows(&perturb_rows(&even, mode).unwrap(), mode).unwrap();
            prop_assert_eq!(twice, even);
        }
    }
}
