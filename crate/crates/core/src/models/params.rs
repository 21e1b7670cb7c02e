use std::ops::Index;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

/// Dense tensor with an explicit shape; data is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    /// Xavier/Glorot uniform for a `[fan_in, fan_out]` matrix.
    pub fn xavier(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
        Self {
            shape: vec![fan_in, fan_out],
            data: (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn normal(shape: &[usize], std: f64, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        Self {
            shape: shape.to_vec(),
            data: (0..shape.iter().product()).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named model tensors in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

/// Gradients share the names and shapes of the parameters.
pub type GradSet = ParamSet;

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = t,
            None => self.entries.push((name, t)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Mutable data of a tensor that must exist.
    pub(crate) fn data_mut(&mut self, name: &str) -> &mut [f64] {
        &mut self
            .get_mut(name)
            .unwrap_or_else(|| panic!("missing tensor {name}"))
            .data
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(&t.shape)))
                .collect(),
        }
    }

    /// Same names and shapes, in the same order.
    pub fn is_congruent(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, ta), (b, tb))| a == b && ta.shape == tb.shape)
    }

    /// `self += scale · other`; shapes must be congruent.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in &mut self.entries {
            for x in &mut t.data {
                *x *= s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }
}

impl Index<&str> for ParamSet {
    type Output = Tensor;

    fn index(&self, name: &str) -> &Tensor {
        self.get(name).unwrap_or_else(|| panic!("missing tensor {name}"))
    }
}
