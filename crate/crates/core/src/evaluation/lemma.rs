use crate::error::{Error, Result};
use crate::exec::{self, Exec};

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Segments of length `(i/k)·L` cut from a period-`L` series: number of
/// segments until a segment recurs, `k / gcd(i, k)`.
pub fn reoccurrence_n(i: usize, k: usize) -> Result<usize> {
    if i == 0 || k == 0 {
        return Err(Error::NonPositive);
    }
    Ok(k / gcd(i, k))
}

/// Simulated counterpart of [`reoccurrence_n`]: cuts a sampled sine of
/// period `L` into `(i/k)·L`-step segments and finds the smallest shift `n`
/// with segment `s` equal to segment `s + n` for every tested `s`.
pub fn reoccurrence_brute_force(i: usize, k: usize, period: usize) -> Result<usize> {
    if i == 0 || k == 0 || period == 0 {
        return Err(Error::NonPositive);
    }
    if (i * period) % k != 0 {
        return Err(Error::NonIntegerSegment { i, k, period });
    }
    let seg = i * period / k;
    let table: Vec<f64> = (0..period)
        .map(|t| (std::f64::consts::TAU * t as f64 / period as f64).sin())
        .collect();
    // Segment phases repeat after at most k segments; test k starts against
    // shifts up to k.
    let len = 2 * k * seg;
    let x: Vec<f64> = (0..len).map(|t| table[t % period]).collect();
    let segment = |s: usize| &x[s * seg..(s + 1) * seg];
    (1..=k)
        .find(|&n| (0..k).all(|s| segment(s) == segment(s + n)))
        .ok_or(Error::NonIntegerSegment { i, k, period })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LemmaRow {
    pub k: usize,
    pub i: usize,
    pub closed_form: usize,
    pub brute_force: usize,
}

impl LemmaRow {
    pub fn agrees(&self) -> bool {
        self.closed_form == self.brute_force
    }
}

/// Closed form against simulation for `1 ≤ k ≤ k_max`, `1 ≤ i ≤ i_max`,
/// using period `L = k` so every segment length is an integer.
pub fn lemma_table(k_max: usize, i_max: usize, exec: Exec) -> Result<Vec<LemmaRow>> {
    if k_max == 0 || i_max == 0 {
        return Err(Error::NonPositive);
    }
    let cells: Vec<(usize, usize)> = (1..=k_max)
        .flat_map(|k| (1..=i_max).map(move |i| (k, i)))
        .collect();
    exec::map_indexed(exec, &cells, |_, &(k, i)| {
        Ok(LemmaRow {
            k,
            i,
            closed_form: reoccurrence_n(i, k)?,
            brute_force: reoccurrence_brute_force(i, k, k)?,
        })
    })
    .into_iter()
    .collect()
}
