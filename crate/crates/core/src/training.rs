//! Adam, losses and the epoch loop with early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::alignment::{ForecastMask, PatchSequence};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::models::{backward, Example, GradSet, Model, ModelConfig, ParamSet, TaskKind};
use crate::seeded_rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: GradSet,
    pub v: GradSet,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ParamSet, grads: &GradSet, state: &mut AdamState, lr: f64) -> Result<()> {
    if !params.is_congruent(grads) || !params.is_congruent(&state.m) || !params.is_congruent(&state.v) {
        return Err(Error::ShapeMismatch("gradients do not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let moments = state.m.iter_mut().zip(state.v.iter_mut());
    for (((_, p), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
        for k in 0..p.data.len() {
            let gk = g.data[k];
            m.data[k] = ADAM_BETA1 * m.data[k] + (1.0 - ADAM_BETA1) * gk;
            v.data[k] = ADAM_BETA2 * v.data[k] + (1.0 - ADAM_BETA2) * gk * gk;
            let m_hat = m.data[k] / c1;
            let v_hat = v.data[k] / c2;
            p.data[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok((lse - logits[label]).max(0.0))
}

/// Mean squared error over the entries of masked patches.
pub fn masked_mse(pred: &PatchSequence, target: &PatchSequence, mask: &ForecastMask) -> Result<f64> {
    if pred.grid != target.grid || pred.patch_dim() != target.patch_dim() || mask.grid != pred.grid {
        return Err(Error::ShapeMismatch("prediction, target and mask disagree".into()));
    }
    if mask.masked_patch_indices.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for &i in &mask.masked_patch_indices {
        for (a, b) in pred.patches[i].iter().zip(&target.patches[i]) {
            sum += (a - b) * (a - b);
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Softmax probabilities of classification logits.
pub use crate::models::linalg::softmax as class_probabilities;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving epochs tolerated; `None` never stops early.
    pub patience: Option<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl TrainConfig {
    /// Defaults per task family: 30 epochs / patience 8 for classification,
    /// 20 / 3 for forecasting.
    pub fn for_task(task: TaskKind) -> Self {
        let (max_epochs, patience) = match task {
            TaskKind::Classify => (30, 8),
            _ => (20, 3),
        };
        Self {
            learning_rate: 1e-4,
            batch_size: 32,
            max_epochs,
            patience: Some(patience),
            seed: 0,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument("learning rate must be finite and non-negative".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == Some(0) {
            return Err(Error::InvalidArgument(
                "batch size, epochs and patience must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl History {
    /// `epoch,train_loss,val_metric,seconds` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_metric,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{:.3}\n", e.epoch, e.train_loss, e.val_metric, e.seconds));
        }
        out
    }

    /// Loss and metric columns only, for reproducibility comparisons.
    pub fn without_timing(&self) -> Vec<(usize, u64, u64)> {
        self.epochs
            .iter()
            .map(|e| (e.epoch, e.train_loss.to_bits(), e.val_metric.to_bits()))
            .collect()
    }
}

/// Whether larger validation metrics are better for `task`.
pub fn higher_is_better(task: TaskKind) -> bool {
    task == TaskKind::Classify
}

/// Validation metric: accuracy for classification, mean loss otherwise.
pub fn validation_metric(model: &Model, data: &[Example], exec: Exec) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per = exec::map_indexed(exec, data, |_, ex| -> Result<f64> {
        match ex {
            Example::Classify { images, label } => {
                Ok(if model.predict_class(images)? == *label { 1.0 } else { 0.0 })
            }
            _ => model.example_loss(ex),
        }
    });
    let mut total = 0.0;
    for v in per {
        total += v?;
    }
    Ok(total / data.len() as f64)
}

/// Trains a freshly initialized model and returns the best-validation
/// parameters.
pub fn train(
    model_cfg: &ModelConfig,
    train_data: &[Example],
    val_data: &[Example],
    cfg: &TrainConfig,
) -> Result<(ParamSet, History)> {
    let model = Model::new(model_cfg.clone(), cfg.seed)?;
    train_from(model, train_data, val_data, cfg)
}

/// Continues training `model` from its current parameters.
pub fn train_from(
    mut model: Model,
    train_data: &[Example],
    val_data: &[Example],
    cfg: &TrainConfig,
) -> Result<(ParamSet, History)> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let higher = higher_is_better(model.config.task);
    let mut rng = seeded_rng(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut adam = AdamState::new(&model.params);
    let mut best: Option<(f64, ParamSet)> = None;
    let mut history = History::default();
    let mut stale = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_data[i].clone()).collect();
            let (loss, grads) = backward(&model.config, &batch, &model.params, cfg.exec)?;
            adam_step(&mut model.params, &grads, &mut adam, cfg.learning_rate)?;
            loss_sum += loss * batch.len() as f64;
        }
        if !model.params.all_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let val = validation_metric(&model, val_data, cfg.exec)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            val_metric: val,
            seconds: start.elapsed().as_secs_f64(),
        });
        let improved = match &best {
            None => true,
            Some((b, _)) => {
                if higher {
                    val > *b
                } else {
                    val < *b
                }
            }
        };
        if improved {
            best = Some((val, model.params.clone()));
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
    }
    let (_, params) = best.expect("at least one epoch ran");
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Arch, Tensor};

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::filled(&[3], 0.7));
        let g = p.zeros_like();
        let mut st = AdamState::new(&p);
        let before = p.clone();
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut st, 0.1).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        for g0 in [1e-3, -2.0, 50.0] {
            let mut p = ParamSet::new();
            p.insert("w", Tensor::zeros(&[1]));
            let mut g = p.zeros_like();
            g.insert("w", Tensor::filled(&[1], g0));
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &g, &mut st, 0.01).unwrap();
            let delta = p["w"].data[0];
            assert!((delta + 0.01 * g0.signum()).abs() < 1e-6, "{delta}");
        }
    }

    #[test]
    fn quadratic_loss_decreases() {
        let mut p = ParamSet::new();
        p.insert("x", Tensor::filled(&[1], 1.0));
        let mut st = AdamState::new(&p);
        let mut prev = 1.0;
        for _ in 0..100 {
            let x = p["x"].data[0];
            let mut g = p.zeros_like();
            g.insert("x", Tensor::filled(&[1], 2.0 * x));
            adam_step(&mut p, &g, &mut st, 1e-2).unwrap();
            let loss = p["x"].data[0].powi(2);
            assert!(loss < prev);
            prev = loss;
        }
    }

    #[test]
    fn zero_learning_rate_is_inert() {
        let mut p = ParamSet::new();
        p.insert("x", Tensor::filled(&[2], 1.5));
        let mut g = p.zeros_like();
        g.insert("x", Tensor::filled(&[2], 3.0));
        let before = p.clone();
        adam_step(&mut p, &g, &mut AdamState::new(&before), 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn cross_entropy_cases() {
        assert!((cross_entropy(&[0.3, 0.3], 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let l = cross_entropy(&[1000.0, -1000.0], 0).unwrap();
        assert!(l.is_finite() && l < 1e-12);
        assert!(cross_entropy(&[1000.0, -1000.0], 1).unwrap().is_finite());
        assert!(matches!(cross_entropy(&[1.0], 1), Err(Error::LabelOutOfRange { .. })));
        let p = class_probabilities(&[1.0, 2.0]);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn masked_mse_cases() {
        let seq = |v: f64| PatchSequence {
            patches: vec![vec![v; 3]; 4],
            grid: (2, 2),
            patch_size: 1,
        };
        let mask = ForecastMask {
            masked_patch_indices: vec![1, 3],
            boundary_col: 1,
            grid: (2, 2),
        };
        assert_eq!(masked_mse(&seq(1.0), &seq(1.0), &mask).unwrap(), 0.0);
        let mut pred = seq(0.0);
        pred.patches[0][0] = 100.0;
        assert_eq!(masked_mse(&pred, &seq(0.0), &mask).unwrap(), 0.0);
        pred.patches[3][2] = 2.0;
        let single = ForecastMask {
            masked_patch_indices: vec![3],
            ..mask.clone()
        };
        let mut one = PatchSequence {
            patches: vec![vec![0.0]; 4],
            grid: (2, 2),
            patch_size: 1,
        };
        let zero = one.clone();
        one.patches[3][0] = 2.0;
        assert_eq!(masked_mse(&one, &zero, &single).unwrap(), 4.0);
        assert!(matches!(
            masked_mse(&one, &zero, &ForecastMask::empty((2, 2))),
            Err(Error::EmptyMask)
        ));
    }

    fn linear_task(n: usize, seed: u64) -> Vec<Example> {
        use rand::Rng;
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                let px: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = vec![px[0] - 0.5 * px[9], 0.25 * px[30] + 0.1];
                Example::Forecast {
                    image: crate::GrayImage::new(8, 8, px).unwrap(),
                    target,
                }
            })
            .collect()
    }

    fn linear_cfg() -> ModelConfig {
        ModelConfig {
            embed_dim: 4,
            num_heads: 1,
            patch_size: 4,
            image_size: 8,
            horizon: 2,
            ..ModelConfig::new(Arch::WithoutLvm, TaskKind::ForecastLinear)
        }
    }

    #[test]
    fn linear_model_fits_linear_task() {
        let data = linear_task(64, 1);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            max_epochs: 200,
            patience: None,
            seed: 3,
            exec: Exec::Sequential,
        };
        let (params, history) = train(&linear_cfg(), &data, &data, &cfg).unwrap();
        let model = Model::from_params(linear_cfg(), params).unwrap();
        let mse = validation_metric(&model, &data, Exec::Sequential).unwrap();
        assert!(mse < 1e-3, "train mse {mse}");
        assert_eq!(history.epochs.len(), 200);
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let data = linear_task(16, 2);
        // Validation targets far from anything learnable from the train set;
        // a huge learning rate makes epoch 2 worse than epoch 1.
        let cfg = TrainConfig {
            learning_rate: 5.0,
            batch_size: 4,
            max_epochs: 10,
            patience: Some(1),
            seed: 1,
            exec: Exec::Sequential,
        };
        let (params, history) = train(&linear_cfg(), &data, &data, &cfg).unwrap();
        let vals: Vec<f64> = history.epochs.iter().map(|e| e.val_metric).collect();
        let best = history.best_epoch;
        assert!(vals.iter().all(|&v| v >= vals[best - 1]));
        let model = Model::from_params(linear_cfg(), params).unwrap();
        assert_eq!(validation_metric(&model, &data, Exec::Sequential).unwrap(), vals[best - 1]);
        if vals[1] >= vals[0] {
            assert_eq!(history.epochs.len(), 2);
            assert_eq!(best, 1);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = linear_task(20, 5);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 6,
            max_epochs: 4,
            patience: None,
            seed: 9,
            exec: Exec::Parallel,
        };
        let a = train(&linear_cfg(), &data, &data, &cfg).unwrap();
        let b = train(&linear_cfg(), &data, &data, &TrainConfig { exec: Exec::Sequential, ..cfg }).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.without_timing(), b.1.without_timing());
    }
}
