use crate::error::{Error, Result};

fn check(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<usize> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} rows", pred.len(), truth.len())));
    }
    let mut n = 0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::ShapeMismatch(format!("row lengths {} vs {}", p.len(), t.len())));
        }
        n += p.len();
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(n)
}

/// Mean squared error over all entries of a `d × T'` forecast.
pub fn metric_mse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let n = check(pred, truth)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok(sum / n as f64)
}

/// Mean absolute error over all entries of a `d × T'` forecast.
pub fn metric_mae(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let n = check(pred, truth)?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()))
        .sum();
    Ok(sum / n as f64)
}

pub fn metric_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: preds.len(),
        });
    }
    let hits = preds.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Higher,
    Lower,
}

/// Relative degradation in percent; positive means worse.
pub fn performance_drop(base: f64, perturbed: f64, better: Better) -> Result<f64> {
    if base == 0.0 {
        return Err(Error::DivByZero);
    }
    Ok(match better {
        Better::Higher => (base - perturbed) / base * 100.0,
        Better::Lower => (perturbed - base) / base * 100.0,
    })
}
