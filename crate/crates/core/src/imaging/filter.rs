use crate::numerics::Matrix;
use crate::{Error, Result};

/// Horizontal-edge Prewitt kernel, applied as a correlation.
pub const PREWITT_KERNEL: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -1.0, -1.0]];

/// Correlates `img` with [`PREWITT_KERNEL`] using replicate padding. The
/// output has the input's size and is not renormalised.
pub fn prewitt(img: &Matrix) -> Result<Matrix> {
    let (h, w) = img.shape();
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!(
            "prewitt needs at least a 3x3 image, got {h}x{w}"
        )));
    }
    // middle kernel row is zero, so only the rows above and below matter
    let mut out = Matrix::zeros(h, w);
    for y in 0..h {
        let above = img.row(y.saturating_sub(1));
        let below = img.row((y + 1).min(h - 1));
        let dst = out.row_mut(y);
        for x in 0..w {
            let l = x.saturating_sub(1);
            let r = (x + 1).min(w - 1);
            let up = PREWITT_KERNEL[0][0] * above[l]
                + PREWITT_KERNEL[0][1] * above[x]
                + PREWITT_KERNEL[0][2] * above[r];
            let down = PREWITT_KERNEL[2][0] * below[l]
                + PREWITT_KERNEL[2][1] * below[x]
                + PREWITT_KERNEL[2][2] * below[r];
            dst[x] = up + down;
        }
    }
    Ok(out)
}

/// Min-max rescale to `[0, 1]`; a constant image maps to zeros.
pub fn rescale_unit(img: &Matrix) -> Matrix {
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    if !(span > 0.0) {
        return Matrix::zeros(img.rows(), img.cols());
    }
    img.map(|v| (v - lo) / span)
}

/// Green/magenta false-colour overlay: red and blue carry `base`, green
/// carries `filtered`. Equal inputs give gray pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeImage {
    pub r: Matrix,
    pub g: Matrix,
    pub b: Matrix,
}

impl CompositeImage {
    pub fn planes(&self) -> [&Matrix; 3] {
        [&self.r, &self.g, &self.b]
    }
}

/// Builds the overlay of two images already scaled to `[0, 1]`.
pub fn composite(base: &Matrix, filtered: &Matrix) -> Result<CompositeImage> {
    if base.shape() != filtered.shape() {
        return Err(Error::dims(format!(
            "composite inputs differ: {:?} vs {:?}",
            base.shape(),
            filtered.shape()
        )));
    }
    for (name, m) in [("base", base), ("filtered", filtered)] {
        let (lo, hi) = m.min_max();
        if !m.is_empty() && (lo < 0.0 || hi > 1.0) {
            return Err(Error::invalid(format!(
                "{name} image must lie in [0, 1], got [{lo}, {hi}]"
            )));
        }
    }
    Ok(CompositeImage {
        r: base.clone(),
        g: filtered.clone(),
        b: base.clone(),
    })
}
