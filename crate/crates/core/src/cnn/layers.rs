//! Forward and backward kernels. All tensors are CHW and contiguous.

use super::Shape;

/// Valid, stride-1 correlation. `weights` is `[out][in][kh][kw]`.
pub(super) fn conv_forward(
    input: &[f64],
    in_shape: Shape,
    weights: &[f64],
    bias: &[f64],
    kernel: (usize, usize),
    out_shape: Shape,
    out: &mut [f64],
) {
    let (kh, kw) = kernel;
    let (ih, iw) = (in_shape.height, in_shape.width);
    let (oh, ow) = (out_shape.height, out_shape.width);
    let plane_in = ih * iw;
    let plane_out = oh * ow;
    for o in 0..out_shape.channels {
        let dst = &mut out[o * plane_out..(o + 1) * plane_out];
        dst.fill(bias[o]);
        for i in 0..in_shape.channels {
            let src = &input[i * plane_in..(i + 1) * plane_in];
            let wbase = (o * in_shape.channels + i) * kh * kw;
            for ky in 0..kh {
                for kx in 0..kw {
                    let w = weights[wbase + ky * kw + kx];
                    for y in 0..oh {
                        let s = &src[(y + ky) * iw + kx..(y + ky) * iw + kx + ow];
                        let d = &mut dst[y * ow..(y + 1) * ow];
                        for (dv, &sv) in d.iter_mut().zip(s) {
                            *dv += w * sv;
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients; writes the input gradient when
/// `grad_in` is given.
#[allow(clippy::too_many_arguments)]
pub(super) fn conv_backward(
    input: &[f64],
    in_shape: Shape,
    weights: &[f64],
    kernel: (usize, usize),
    out_shape: Shape,
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    mut grad_in: Option<&mut [f64]>,
) {
    let (kh, kw) = kernel;
    let (ih, iw) = (in_shape.height, in_shape.width);
    let (oh, ow) = (out_shape.height, out_shape.width);
    let plane_in = ih * iw;
    let plane_out = oh * ow;
    if let Some(g) = grad_in.as_deref_mut() {
        g.fill(0.0);
    }
    for o in 0..out_shape.channels {
        let go = &grad_out[o * plane_out..(o + 1) * plane_out];
        grad_b[o] += go.iter().sum::<f64>();
        for i in 0..in_shape.channels {
            let src = &input[i * plane_in..(i + 1) * plane_in];
            let wbase = (o * in_shape.channels + i) * kh * kw;
            for ky in 0..kh {
                for kx in 0..kw {
                    let mut acc = 0.0;
                    for y in 0..oh {
                        let s = &src[(y + ky) * iw + kx..(y + ky) * iw + kx + ow];
                        let g = &go[y * ow..(y + 1) * ow];
                        acc += s.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                    }
                    grad_w[wbase + ky * kw + kx] += acc;
                    if let Some(gi) = grad_in.as_deref_mut() {
                        let w = weights[wbase + ky * kw + kx];
                        let gplane = &mut gi[i * plane_in..(i + 1) * plane_in];
                        for y in 0..oh {
                            let d = &mut gplane[(y + ky) * iw + kx..(y + ky) * iw + kx + ow];
                            let g = &go[y * ow..(y + 1) * ow];
                            for (dv, &gv) in d.iter_mut().zip(g) {
                                *dv += w * gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Max pooling; `argmax` receives the flat input index chosen for each
/// output (first maximum wins ties).
pub(super) fn pool_forward(
    input: &[f64],
    in_shape: Shape,
    size: (usize, usize),
    stride: (usize, usize),
    out_shape: Shape,
    out: &mut [f64],
    argmax: &mut [u32],
) {
    let (ph, pw) = size;
    let (sh, sw) = stride;
    let iw = in_shape.width;
    let plane_in = in_shape.plane();
    let plane_out = out_shape.plane();
    for c in 0..in_shape.channels {
        for y in 0..out_shape.height {
            for x in 0..out_shape.width {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..ph {
                    for dx in 0..pw {
                        let idx = c * plane_in + (y * sh + dy) * iw + x * sw + dx;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = c * plane_out + y * out_shape.width + x;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}

pub(super) fn pool_backward(grad_out: &[f64], argmax: &[u32], grad_in: &mut [f64]) {
    grad_in.fill(0.0);
    for (&g, &idx) in grad_out.iter().zip(argmax) {
        grad_in[idx as usize] += g;
    }
}

/// `out = W·x + b` with `W` stored `[outputs][inputs]`.
pub(super) fn fc_forward(input: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    for (o, dst) in out.iter_mut().enumerate() {
        let row = &weights[o * n_in..(o + 1) * n_in];
        *dst = bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(super) fn fc_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    grad_in: Option<&mut [f64]>,
) {
    let n_in = input.len();
    for (o, &g) in grad_out.iter().enumerate() {
        grad_b[o] += g;
        if g == 0.0 {
            continue;
        }
        let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
        for (w, &x) in gw.iter_mut().zip(input) {
            *w += g * x;
        }
    }
    if let Some(gi) = grad_in {
        gi.fill(0.0);
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = &weights[o * n_in..(o + 1) * n_in];
            for (d, &w) in gi.iter_mut().zip(row) {
                *d += g * w;
            }
        }
    }
}

pub(super) fn softmax(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// `−log softmax(logits)[label]`, computed from the logits.
pub(super) fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}
