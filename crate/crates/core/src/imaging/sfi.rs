use crate::numerics::Matrix;
use crate::{Error, Result};

pub const DEFAULT_SEGMENTS: usize = 5;
/// Depth change (mm) at or below which a pixel is considered static.
pub const DEFAULT_MOTION_THRESHOLD: f64 = 10.0;

/// Front-view depth frames in millimetres, all of the same size.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSequence {
    frames: Vec<Matrix>,
}

impl DepthSequence {
    pub fn new(frames: Vec<Matrix>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid(format!(
                "depth sequence needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        let shape = frames[0].shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::invalid("depth frames must be non-empty"));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.shape() != shape {
                return Err(Error::dims(format!(
                    "frame {i} is {:?}, frame 0 is {shape:?}",
                    f.shape()
                )));
            }
            if f.as_slice().iter().any(|&v| v < 0.0) {
                return Err(Error::invalid(format!("frame {i} has negative depth")));
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Matrix] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_shape(&self) -> (usize, usize) {
        self.frames[0].shape()
    }
}

/// Sequential front-view image for the prefix ending at segment
/// `segment_index` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct SfiImage {
    pub pixels: Matrix,
    pub segment_index: usize,
}

/// Frame count covered by the first `k` of `segments` equal-length segments.
fn prefix_end(frames: usize, k: usize, segments: usize) -> usize {
    k * frames / segments
}

/// Cumulative motion energy per prefix, before normalisation.
///
/// Entry `k` sums `|f[t+1] − f[t]|` over all frame pairs inside the first
/// `k + 1` segments, keeping only differences above `motion_threshold`.
pub fn sfi_energy(
    depth: &DepthSequence,
    segments: usize,
    motion_threshold: f64,
) -> Result<Vec<Matrix>> {
    if segments == 0 {
        return Err(Error::invalid("segment count must be at least 1"));
    }
    if !(motion_threshold >= 0.0) {
        return Err(Error::invalid(format!(
            "motion threshold must be >= 0, got {motion_threshold}"
        )));
    }
    let n = depth.len();
    if n < segments + 1 {
        return Err(Error::invalid(format!(
            "{segments} segments need at least {} frames, got {n}",
            segments + 1
        )));
    }
    let (h, w) = depth.frame_shape();
    let frames = depth.frames();
    let mut acc = Matrix::zeros(h, w);
    let mut out = Vec::with_capacity(segments);
    let mut t = 0;
    for k in 1..=segments {
        let end = prefix_end(n, k, segments);
        while t + 1 < end {
            for ((a, &next), &cur) in acc
                .as_mut_slice()
                .iter_mut()
                .zip(frames[t + 1].as_slice())
                .zip(frames[t].as_slice())
            {
                let d = (next - cur).abs();
                if d > motion_threshold {
                    *a += d;
                }
            }
            t += 1;
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// `segments` sequential front-view images, each the min-max normalised
/// cumulative energy from the first frame to the end of its segment. The
/// last image covers the whole action.
pub fn make_sfi(
    depth: &DepthSequence,
    segments: usize,
    motion_threshold: f64,
) -> Result<Vec<SfiImage>> {
    Ok(sfi_energy(depth, segments, motion_threshold)?
        .into_iter()
        .enumerate()
        .map(|(segment_index, e)| SfiImage {
            pixels: super::rescale_unit(&e),
            segment_index,
        })
        .collect())
}
