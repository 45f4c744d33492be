//! Synthetic two-modality dataset in which each modality carries half of
//! the label.
//!
//! The label encodes two bits, `label = 2·b1 + b2`. The depth recording
//! shows a blob moving horizontally (`b1 = 0`) or vertically (`b1 = 1`);
//! the inertial recording oscillates slowly (`b2 = 0`) or quickly
//! (`b2 = 1`). Everything else (positions, direction of travel, blob
//! size, amplitudes, phases) is drawn independently of the label, so a
//! single modality can recover only one bit.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::manifest::{Dataset, Manifest, ManifestEntry, Sample};
use crate::imaging::{write_inertial_csv, write_pgm16, DepthSequence, InertialSequence};
use crate::io::write_file;
use crate::numerics::Matrix;
use crate::{Error, Result};

const BACKGROUND_MM: f64 = 2000.0;
const ACCEL_SCALE: f64 = 1.0;
const GYRO_SCALE: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub samples_per_class: usize,
    /// Gaussian noise level relative to the signal scale (depth: 100 mm,
    /// accelerometer: 1 g, gyroscope: 20 deg/s).
    pub noise: f64,
    pub seed: u64,
    pub frames: usize,
    pub frame_size: usize,
    pub timesteps: usize,
    pub rate_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 4,
            samples_per_class: 50,
            noise: 0.0,
            seed: 0,
            frames: 16,
            frame_size: 32,
            timesteps: 104,
            rate_hz: 50.0,
        }
    }
}

pub const SYNTH_CLASS_NAMES: [&str; 4] = [
    "horizontal-slow",
    "horizontal-fast",
    "vertical-slow",
    "vertical-fast",
];

/// Generates the dataset in memory. Depth values are whole millimetres, so
/// writing and reloading the dataset reproduces it exactly.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.classes != 4 {
        return Err(Error::invalid(format!(
            "the two-bit construction needs exactly 4 classes, got {}",
            cfg.classes
        )));
    }
    if cfg.samples_per_class < 25 {
        return Err(Error::invalid("need at least 25 samples per class"));
    }
    if !(cfg.noise >= 0.0) || !cfg.noise.is_finite() {
        return Err(Error::invalid("noise must be a non-negative number"));
    }
    if cfg.frame_size < 16 || cfg.frames < 6 || cfg.timesteps < 52 {
        return Err(Error::invalid("synthetic geometry too small"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(4 * cfg.samples_per_class);
    for i in 0..cfg.samples_per_class {
        for label in 0..4 {
            let (b1, b2) = (label / 2, label % 2);
            samples.push(Sample {
                subject: format!("s{}", i % 8 + 1),
                label,
                depth: synth_depth(b1 == 1, cfg, &mut rng)?,
                inertial: synth_inertial(b2 == 1, cfg, &mut rng)?,
            });
        }
    }
    Ok(Dataset {
        class_names: SYNTH_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        rate_hz: cfg.rate_hz,
        samples,
    })
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn synth_depth(vertical: bool, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<DepthSequence> {
    let size = cfg.frame_size as f64;
    let radius = rng.random_range(2.5..4.0);
    let blob_mm = rng.random_range(900.0..1400.0);
    let margin = radius + 1.0;
    let travel = rng.random_range(0.4..0.6) * size;
    let lane = rng.random_range(margin..size - margin);
    let start = rng.random_range(margin..size - margin - travel);
    let forward = rng.random_bool(0.5);
    let mut frames = Vec::with_capacity(cfg.frames);
    for f in 0..cfg.frames {
        let s = f as f64 / (cfg.frames - 1) as f64;
        let along = if forward {
            start + s * travel
        } else {
            start + (1.0 - s) * travel
        };
        let (cy, cx) = if vertical {
            (along, lane)
        } else {
            (lane, along)
        };
        frames.push(Matrix::from_fn(cfg.frame_size, cfg.frame_size, |r, c| {
            let (dy, dx) = (r as f64 + 0.5 - cy, c as f64 + 0.5 - cx);
            let mut v = if dy * dy + dx * dx <= radius * radius {
                blob_mm
            } else {
                BACKGROUND_MM
            };
            if cfg.noise > 0.0 {
                v += cfg.noise * 100.0 * gauss(rng);
            }
            v.round().clamp(0.0, 65535.0)
        }));
    }
    DepthSequence::new(frames)
}

fn synth_inertial(fast: bool, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<InertialSequence> {
    let freq = if fast {
        rng.random_range(3.5..4.5)
    } else {
        rng.random_range(1.0..1.6)
    };
    let mut channels = Matrix::zeros(6, cfg.timesteps);
    for ch in 0..6 {
        let scale = if ch < 3 { ACCEL_SCALE } else { GYRO_SCALE };
        let amp = rng.random_range(0.9..1.1) * scale;
        let phase = rng.random_range(0.0..2.0 * PI);
        let offset = rng.random_range(-0.1..0.1) * scale;
        for (t, v) in channels.row_mut(ch).iter_mut().enumerate() {
            let time = t as f64 / cfg.rate_hz;
            *v = offset + amp * (2.0 * PI * freq * time + phase).sin();
            if cfg.noise > 0.0 {
                *v += cfg.noise * scale * gauss(rng);
            }
        }
    }
    InertialSequence::new(channels, cfg.rate_hz)
}

/// Writes `data` under `dir` as a manifest plus one CSV and one PGM frame
/// directory per sample. Returns the manifest path.
pub fn write_dataset(data: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let mut entries = Vec::with_capacity(data.len());
    for (i, s) in data.samples.iter().enumerate() {
        let inertial = PathBuf::from(format!("inertial/{i:04}.csv"));
        let depth = PathBuf::from(format!("depth/{i:04}"));
        write_inertial_csv(dir.join(&inertial), &s.inertial)?;
        for (f, frame) in s.depth.frames().iter().enumerate() {
            write_pgm16(dir.join(&depth).join(format!("{f:04}.pgm")), frame)?;
        }
        entries.push(ManifestEntry {
            subject: s.subject.clone(),
            label: s.label,
            inertial,
            depth,
        });
    }
    let manifest = Manifest {
        rate_hz: data.rate_hz,
        class_names: data.class_names.clone(),
        entries,
    };
    let path = dir.join("manifest.txt");
    write_file(&path, manifest.to_text().as_bytes())?;
    Ok(path)
}
