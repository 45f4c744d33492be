//! Finite-difference verification of backpropagation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::cross_entropy;
use super::{CnnModel, LayerKind, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step, in `(0, 1e-2]`.
    pub step: f64,
    /// Parameters sampled from each parameterised layer (all of them when
    /// the layer has fewer).
    pub per_layer: usize,
    pub seed: u64,
    /// Multiplier applied to the analytic gradient before comparison. Only
    /// useful for checking the checker itself; leave at 1.
    pub analytic_scale: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            per_layer: 200,
            seed: 0,
            analytic_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradCheck {
    pub layer: String,
    pub kind: LayerKind,
    pub checked: usize,
    /// Samples dropped because the perturbation changed a ReLU mask or a
    /// pooling choice.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub layers: Vec<LayerGradCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }
}

/// Compares analytic gradients with central differences using default
/// options and the given step.
pub fn gradient_check(
    model: &CnnModel,
    image: &Tensor,
    label: usize,
    step: f64,
) -> Result<GradCheckReport> {
    gradient_check_with(
        model,
        image,
        label,
        &GradCheckOptions {
            step,
            ..GradCheckOptions::default()
        },
    )
}

/// Relative error `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)` maximised over a
/// random subsample of parameters from every parameterised layer.
///
/// Perturbations that move the network into a different piecewise-linear
/// region (a ReLU flips or a pooling window changes its winner) are
/// resampled, since central differences are meaningless across a kink.
pub fn gradient_check_with(
    model: &CnnModel,
    image: &Tensor,
    label: usize,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    if !(opts.step > 0.0 && opts.step <= 1e-2) {
        return Err(Error::invalid(format!(
            "gradient check step must be in (0, 1e-2], got {}",
            opts.step
        )));
    }
    let mut grads = model.zero_gradients();
    let (_, base) = model.backprop(image, label, &mut grads)?;
    let last = model.layers().len() - 1;
    let base_routing = base.routing(model);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        layers: Vec::new(),
    };
    for (li, spec) in model.layers().iter().enumerate() {
        if !spec.kind.has_params() {
            continue;
        }
        let n_w = model.params()[li].weights.len();
        let n_b = model.params()[li].bias.len();
        let mut candidates: Vec<usize> = (0..n_w + n_b).collect();
        candidates.shuffle(&mut rng);

        let mut entry = LayerGradCheck {
            layer: spec.name.clone(),
            kind: spec.kind,
            checked: 0,
            skipped_kinks: 0,
            max_rel_error: 0.0,
        };
        for &idx in &candidates {
            if entry.checked >= opts.per_layer {
                break;
            }
            let analytic = opts.analytic_scale
                * if idx < n_w {
                    grads[li].weights[idx]
                } else {
                    grads[li].bias[idx - n_w]
                };
            let mut eval = |delta: f64| -> Result<(f64, Vec<u64>)> {
                let p = &mut probe.params_mut()[li];
                let slot = if idx < n_w {
                    &mut p.weights[idx]
                } else {
                    &mut p.bias[idx - n_w]
                };
                let original = *slot;
                *slot = original + delta;
                let t = probe.trace(image, last);
                let p = &mut probe.params_mut()[li];
                if idx < n_w {
                    p.weights[idx] = original;
                } else {
                    p.bias[idx - n_w] = original;
                }
                let t = t?;
                Ok((cross_entropy(t.logits(), label), t.routing(&probe)))
            };
            let (plus, r_plus) = eval(opts.step)?;
            let (minus, r_minus) = eval(-opts.step)?;
            if r_plus != base_routing || r_minus != base_routing {
                entry.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic - numeric).abs() / denom;
            entry.max_rel_error = entry.max_rel_error.max(rel);
            entry.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(entry.max_rel_error);
        report.layers.push(entry);
    }
    Ok(report)
}
