//! Per-sample Adam training with global-norm gradient clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, TrainError};
use crate::nn::{self, ModelParams};
use crate::skeleton::FeatureMatrix;

/// A feature matrix with its dense class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureMatrix,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Maximum global L2 norm of the gradient.
    pub grad_clip: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 5.0,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        // A zero learning rate is allowed and leaves the model untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} = {b} outside (0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam eps {}", self.adam_eps));
        }
        if !(self.grad_clip > 0.0) {
            return bad(format!("grad clip {}", self.grad_clip));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Fraction of samples classified correctly before their update.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

/// Adam first and second moment estimates, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: ModelParams,
    pub v: ModelParams,
}

impl Moments {
    pub fn zeros_like(model: &ModelParams) -> Moments {
        Moments {
            m: model.zeros_like(),
            v: model.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    moments: &mut Moments,
    t: u64,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    if t == 0 {
        return Err(TrainError::InvalidConfig("Adam step index starts at 1".into()));
    }
    if !params.same_shape(grads) || !params.same_shape(&moments.m) || !params.same_shape(&moments.v) {
        return Err(NnError::ShapeMismatch("params, grads and moments differ".into()).into());
    }
    let (b1, b2) = (config.beta1, config.beta2);
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let corr1 = 1.0 - b1.powi(exp);
    let corr2 = 1.0 - b2.powi(exp);
    let lr = config.learning_rate;
    let eps = config.adam_eps;

    let g_all = grads.tensors();
    let m_all = moments.m.tensors_mut();
    let v_all = moments.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(&g_all).zip(m_all).zip(v_all) {
        for (((p, &g), m), v) in p.data.iter_mut().zip(g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

pub fn global_norm(grads: &ModelParams) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            for v in t.data.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

/// Trains a copy of `init` on `dataset`, one sample per update.
pub fn train(
    dataset: &[Sample],
    config: &TrainConfig,
    init: &ModelParams,
) -> Result<(ModelParams, TrainLog), TrainError> {
    train_with_progress(dataset, config, init, |_, _| {})
}

/// Like [`train`], calling `on_epoch(epoch_index, stats)` after each epoch.
pub fn train_with_progress(
    dataset: &[Sample],
    config: &TrainConfig,
    init: &ModelParams,
    mut on_epoch: impl FnMut(usize, &EpochStats),
) -> Result<(ModelParams, TrainLog), TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    for s in dataset {
        if s.label >= init.num_classes() {
            return Err(NnError::LabelOutOfRange {
                label: s.label,
                num_classes: init.num_classes(),
            }
            .into());
        }
        if s.features.cols() != init.input_size() {
            return Err(NnError::DimensionMismatch(format!(
                "sample width {} for model input {}",
                s.features.cols(),
                init.input_size()
            ))
            .into());
        }
    }

    let mut model = init.clone();
    let mut moments = Moments::zeros_like(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = TrainLog::default();
    let mut step = 0u64;

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for &idx in &order {
            let sample = &dataset[idx];
            let (logits, trace) = nn::forward(&model, &sample.features)?;
            let (loss, dlogits) = nn::softmax_cross_entropy(&logits, sample.label)?;
            loss_sum += loss;
            if nn::argmax(&logits) == sample.label {
                correct += 1;
            }
            let mut grads = nn::backward(&model, &trace, &dlogits)?;
            clip_global_norm(&mut grads, config.grad_clip);
            step += 1;
            adam_step(&mut model, &grads, &mut moments, step, config)?;
        }
        let stats = EpochStats {
            mean_loss: loss_sum / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        };
        on_epoch(epoch, &stats);
        log.epochs.push(stats);
    }
    Ok((model, log))
}

/// Mean loss of `model` over `dataset` without updating anything.
pub fn mean_loss(model: &ModelParams, dataset: &[Sample]) -> Result<f64, NnError> {
    let mut total = 0.0;
    for s in dataset {
        let (logits, _) = nn::forward(model, &s.features)?;
        total += nn::softmax_cross_entropy(&logits, s.label)?.0;
    }
    Ok(total / dataset.len() as f64)
}
