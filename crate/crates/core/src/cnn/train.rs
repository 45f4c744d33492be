use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{argmax, Gradients};
use super::{CnnModel, Tensor};
use crate::io::write_file;
use crate::{Error, Result};

/// Minibatch SGD with classical momentum and a step-decay learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub momentum: f64,
    pub initial_lr: f64,
    pub lr_drop_factor: f64,
    /// Epochs between learning-rate drops.
    pub lr_drop_period: usize,
    /// Weight-decay coefficient λ of the `(λ/2)·‖W‖²` penalty.
    pub l2: f64,
    pub max_epochs: usize,
    pub minibatch: usize,
    pub seed: u64,
    /// Draw fresh He-uniform weights from `seed` before training.
    pub reinitialize: bool,
}

impl TrainConfig {
    /// Schedule used for the signal-image networks.
    pub fn signal_cnn() -> Self {
        Self {
            momentum: 0.9,
            initial_lr: 0.001,
            lr_drop_factor: 0.5,
            lr_drop_period: 10,
            l2: 0.004,
            max_epochs: 100,
            minibatch: 64,
            seed: 0,
            reinitialize: true,
        }
    }

    /// Schedule used for fine-tuning the depth-image backbone.
    pub fn depth_backbone() -> Self {
        Self {
            initial_lr: 0.005,
            max_epochs: 50,
            minibatch: 128,
            ..Self::signal_cnn()
        }
    }

    /// `initial_lr · drop^⌊epoch / period⌋` for a 0-based epoch.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.lr_drop_period.max(1)) as i32;
        self.initial_lr * self.lr_drop_factor.powi(drops)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "initial learning rate must be > 0, got {}",
                self.initial_lr
            )));
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "drop factor must be in (0, 1], got {}",
                self.lr_drop_factor
            )));
        }
        if self.lr_drop_period == 0 || self.minibatch == 0 {
            return Err(Error::invalid("drop period and minibatch must be >= 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::signal_cnn()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean cross-entropy over the epoch's minibatches, before each update.
    pub train_loss: f64,
    pub train_accuracy: f64,
}

pub fn train_log_csv(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,lr,train_loss,train_accuracy\n");
    for e in log {
        writeln!(
            out,
            "{},{},{},{}",
            e.epoch, e.lr, e.train_loss, e.train_accuracy
        )
        .unwrap();
    }
    out
}

pub fn write_train_log(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    write_file(path.as_ref(), train_log_csv(log).as_bytes())
}

/// Momentum state, shaped like the model parameters.
pub(crate) struct Momentum {
    velocity: Gradients,
}

impl Momentum {
    pub(crate) fn new(model: &CnnModel) -> Self {
        Self {
            velocity: model.zero_gradients(),
        }
    }

    /// `v ← m·v − lr·(g + l2·W)`, `W ← W + v`; biases are not decayed.
    /// `grads` hold the mean data gradient.
    pub(crate) fn step(
        &mut self,
        model: &mut CnnModel,
        grads: &Gradients,
        cfg: &TrainConfig,
        lr: f64,
    ) {
        for ((p, g), v) in model
            .params_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.velocity.iter_mut())
        {
            for ((w, &gw), vw) in p
                .weights
                .iter_mut()
                .zip(&g.weights)
                .zip(v.weights.iter_mut())
            {
                *vw = cfg.momentum * *vw - lr * (gw + cfg.l2 * *w);
                *w += *vw;
            }
            for ((b, &gb), vb) in p.bias.iter_mut().zip(&g.bias).zip(v.bias.iter_mut()) {
                *vb = cfg.momentum * *vb - lr * gb;
                *b += *vb;
            }
        }
    }
}

/// Trains `model` on labelled images. Returns the trained model and one
/// log row per epoch. Results are bit-identical for identical inputs.
pub fn train(
    model: &CnnModel,
    images: &[Tensor],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(CnnModel, Vec<EpochLog>)> {
    cfg.validate()?;
    if images.len() != labels.len() {
        return Err(Error::dims(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if images.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let classes = model.classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }

    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.reinitialize {
        model.init_weights_with(&mut rng);
    }
    let mut momentum = Momentum::new(&model);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut log = Vec::with_capacity(cfg.max_epochs);

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(cfg.minibatch) {
            let mut grads = model.zero_gradients();
            for &i in batch {
                let (loss, trace) = model.backprop(&images[i], labels[i], &mut grads)?;
                loss_sum += loss;
                if argmax(trace.probabilities()) == labels[i] {
                    correct += 1;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            for g in grads.iter_mut() {
                g.weights.iter_mut().for_each(|v| *v *= inv);
                g.bias.iter_mut().for_each(|v| *v *= inv);
            }
            momentum.step(&mut model, &grads, cfg, lr);
        }
        let train_loss = loss_sum / images.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        log.push(EpochLog {
            epoch,
            lr,
            train_loss,
            train_accuracy: correct as f64 / images.len() as f64,
        });
    }
    Ok((model, log))
}
