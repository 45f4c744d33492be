//! Seeded random train/test partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            repeats: 20,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        Ok(())
    }
}

/// Train and test sample indices for one repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` with a stream keyed by `(spec.seed, repeat)` and cuts
/// it at `round(train_fraction · n)`.
pub fn split(n: usize, spec: &SplitSpec, repeat: usize) -> Result<Partition> {
    spec.validate()?;
    if repeat >= spec.repeats {
        return Err(Error::invalid(format!(
            "repeat {repeat} out of range for {} repeats",
            spec.repeats
        )));
    }
    let cut = (spec.train_fraction * n as f64).round() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::invalid(format!(
            "{n} samples leave an empty train or test split"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(repeat as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let test = idx.split_off(cut);
    Ok(Partition { train: idx, test })
}
