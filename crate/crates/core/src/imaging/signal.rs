use crate::numerics::Matrix;
use crate::{Error, Result};

/// Accelerometer x/y/z (g) followed by gyroscope x/y/z (deg/s).
pub const INERTIAL_CHANNELS: usize = 6;
pub const SIGNAL_ROWS: usize = 24;
pub const SIGNAL_COLS: usize = 52;
/// Offset between consecutive windows of a long recording.
pub const WINDOW_STRIDE: usize = 26;

/// Row order of the signal image, 1-based channel numbers. Every unordered
/// pair of the six channels sits on adjacent rows at least once.
const STACKING_ORDER: [usize; SIGNAL_ROWS] = [
    1, 2, 3, 4, 5, 6, 1, 3, 5, 2, 4, 6, 1, 4, 2, 5, 3, 6, 1, 5, 2, 6, 1, 6,
];

pub fn stacking_order() -> [usize; SIGNAL_ROWS] {
    STACKING_ORDER
}

/// Six synchronised inertial channels, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialSequence {
    channels: Matrix,
    rate_hz: f64,
}

impl InertialSequence {
    pub fn new(channels: Matrix, rate_hz: f64) -> Result<Self> {
        if channels.rows() != INERTIAL_CHANNELS {
            return Err(Error::invalid(format!(
                "inertial data needs {INERTIAL_CHANNELS} channels, got {}",
                channels.rows()
            )));
        }
        if channels.cols() < SIGNAL_COLS {
            return Err(Error::invalid(format!(
                "inertial data needs at least {SIGNAL_COLS} samples, got {}",
                channels.cols()
            )));
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {rate_hz}"
            )));
        }
        Ok(Self { channels, rate_hz })
    }

    pub fn channels(&self) -> &Matrix {
        &self.channels
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.channels.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channels as a `6 × len` slice view per channel.
    pub fn channel(&self, c: usize) -> &[f64] {
        self.channels.row(c)
    }
}

/// 24×52 image built by stacking inertial channels row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalImage {
    pixels: Matrix,
}

impl SignalImage {
    pub fn pixels(&self) -> &Matrix {
        &self.pixels
    }

    pub fn into_pixels(self) -> Matrix {
        self.pixels
    }

    /// 52×24 view for consumers that want time along the rows.
    pub fn transposed(&self) -> Matrix {
        self.pixels.transpose()
    }
}

/// The 24×52 stack before normalisation: row `r` holds channel
/// `stacking_order()[r]` over samples `[start, start + 52)`.
pub fn raw_signal_image(seq: &InertialSequence, start: usize) -> Result<Matrix> {
    let end = start
        .checked_add(SIGNAL_COLS)
        .filter(|&e| e <= seq.len())
        .ok_or_else(|| {
            Error::invalid(format!(
                "window [{start}, {start}+{SIGNAL_COLS}) exceeds {} samples",
                seq.len()
            ))
        })?;
    let mut img = Matrix::zeros(SIGNAL_ROWS, SIGNAL_COLS);
    for (r, &ch) in STACKING_ORDER.iter().enumerate() {
        img.row_mut(r)
            .copy_from_slice(&seq.channel(ch - 1)[start..end]);
    }
    Ok(img)
}

/// Signal image of the window starting at `start`, min-max normalised to
/// `[0, 1]` (a constant window maps to all zeros).
pub fn make_signal_image(seq: &InertialSequence, start: usize) -> Result<SignalImage> {
    let raw = raw_signal_image(seq, start)?;
    Ok(SignalImage {
        pixels: super::rescale_unit(&raw),
    })
}

/// Window start offsets for a recording of `len` samples, stride 26.
pub fn signal_windows(len: usize) -> Vec<usize> {
    if len < SIGNAL_COLS {
        return Vec::new();
    }
    (0..=(len - SIGNAL_COLS)).step_by(WINDOW_STRIDE).collect()
}
