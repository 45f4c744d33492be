//! Jitter, scaling and time-warp augmentation of inertial recordings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::InertialSequence;
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    /// Additive noise standard deviation as a fraction of each channel's std.
    pub jitter_sigma: f64,
    /// Standard deviation of the per-channel gain, drawn from `N(1, σ)`.
    pub scale_sigma: f64,
    /// Largest local stretch of the time warp, e.g. `0.1` for ±10 %.
    pub warp_max: f64,
    /// Number of (jitter, scale, warp) triples to emit.
    pub copies: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jitter_sigma: 0.05,
            scale_sigma: 0.1,
            warp_max: 0.1,
            copies: 1,
        }
    }
}

impl AugmentConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("jitter_sigma", self.jitter_sigma),
            ("scale_sigma", self.scale_sigma),
            ("warp_max", self.warp_max),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.warp_max >= 1.0 {
            return Err(Error::invalid("warp_max must be below 1"));
        }
        Ok(())
    }
}

/// Returns `3 · copies` augmented recordings ordered jitter, scale, warp for
/// each copy. Output depends only on the inputs and `seed`.
pub fn augment(
    seq: &InertialSequence,
    config: &AugmentConfig,
    seed: u64,
) -> Result<Vec<InertialSequence>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(3 * config.copies);
    for _ in 0..config.copies {
        out.push(jitter(seq, config.jitter_sigma, &mut rng)?);
        out.push(scale(seq, config.scale_sigma, &mut rng)?);
        out.push(time_warp(seq, config.warp_max, &mut rng)?);
    }
    Ok(out)
}

fn channel_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn jitter(seq: &InertialSequence, sigma: f64, rng: &mut ChaCha8Rng) -> Result<InertialSequence> {
    let src = seq.channels();
    let mut m = src.clone();
    for c in 0..src.rows() {
        let sd = sigma * channel_std(src.row(c));
        let noise = Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))?;
        for v in m.row_mut(c) {
            *v += noise.sample(rng);
        }
    }
    InertialSequence::new(m, seq.rate_hz())
}

fn scale(seq: &InertialSequence, sigma: f64, rng: &mut ChaCha8Rng) -> Result<InertialSequence> {
    let gain = Normal::new(1.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut m = seq.channels().clone();
    for c in 0..m.rows() {
        let g = gain.sample(rng);
        m.row_mut(c).iter_mut().for_each(|v| *v *= g);
    }
    InertialSequence::new(m, seq.rate_hz())
}

/// Resamples every channel at `t + d(t)`, where `d` is a cubic vanishing at
/// both ends whose slope stays within `±warp_max`.
fn time_warp(
    seq: &InertialSequence,
    warp_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<InertialSequence> {
    let n = seq.len();
    let span = (n - 1) as f64;
    // d(u) = span · (α·u(1−u) + β·u(1−u)(2u−1)), u = t / span
    let alpha: f64 = rng.random_range(-1.0..=1.0);
    let beta: f64 = rng.random_range(-1.0..=1.0);
    // |1 − 2u| ≤ 1 and |−6u² + 6u − 1| ≤ 1 on [0, 1]
    let peak = alpha.abs() + beta.abs();
    let gain = if peak > 0.0 { warp_max / peak } else { 0.0 };

    let src = seq.channels();
    let mut m = Matrix::zeros(src.rows(), n);
    for t in 0..n {
        let u = t as f64 / span;
        let d = span * gain * (alpha * u * (1.0 - u) + beta * u * (1.0 - u) * (2.0 * u - 1.0));
        let pos = (t as f64 + d).clamp(0.0, span);
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        for c in 0..src.rows() {
            let row = src.row(c);
            m[(c, t)] = if frac == 0.0 || i + 1 >= n {
                row[i.min(n - 1)]
            } else {
                row[i] + frac * (row[i + 1] - row[i])
            };
        }
    }
    InertialSequence::new(m, seq.rate_hz())
}
