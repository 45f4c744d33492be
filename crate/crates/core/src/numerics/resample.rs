//! Bicubic resampling with the Keys kernel.

use super::Matrix;
use crate::{Error, Result};

/// Keys cubic convolution parameter.
pub const BICUBIC_A: f64 = -0.5;

#[inline]
pub(crate) fn cubic_weight(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x < 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Four source taps and their weights for one output coordinate.
#[derive(Debug, Clone, Copy)]
struct Taps {
    idx: [usize; 4],
    w: [f64; 4],
    nearest: usize,
}

fn taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let last = in_len as isize - 1;
    (0..out_len)
        .map(|o| {
            // pixel-centre alignment
            let src = (o as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let frac = src - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0.0; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, last) as usize;
                w[k] = cubic_weight(frac - off as f64);
            }
            let nearest = (src.round() as isize).clamp(0, last) as usize;
            Taps { idx, w, nearest }
        })
        .collect()
}

/// Interpolates `Σ wₖ·vₖ` as `v_ref + Σ wₖ·(vₖ − v_ref)`, which is the same
/// value for weights summing to one and reproduces constants bit-exactly.
#[inline]
fn apply(t: &Taps, get: impl Fn(usize) -> f64) -> f64 {
    let reference = get(t.nearest);
    let mut acc = 0.0;
    for k in 0..4 {
        acc += t.w[k] * (get(t.idx[k]) - reference);
    }
    reference + acc
}

/// Bicubic resize (a = −0.5, edge-replicate padding, pixel-centre alignment).
/// No anti-aliasing prefilter is applied when shrinking.
pub fn bicubic_resize(img: &Matrix, out_h: usize, out_w: usize) -> Result<Matrix> {
    let (h, w) = img.shape();
    if h == 0 || w == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!(
            "bicubic resize needs non-empty shapes, got {h}x{w} -> {out_h}x{out_w}"
        )));
    }
    let col_taps = taps(w, out_w);
    let mut horizontal = Matrix::zeros(h, out_w);
    for r in 0..h {
        let src = img.row(r);
        let dst = horizontal.row_mut(r);
        for (o, t) in dst.iter_mut().zip(&col_taps) {
            *o = apply(t, |i| src[i]);
        }
    }
    let row_taps = taps(h, out_h);
    let mut out = Matrix::zeros(out_h, out_w);
    for (r, t) in row_taps.iter().enumerate() {
        for c in 0..out_w {
            out[(r, c)] = apply(t, |i| horizontal[(i, c)]);
        }
    }
    Ok(out)
}
