//! One-vs-all linear SVM, score normalisation and decision-level max fusion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cnn::argmax;
use crate::io::{put_u32, read_file, write_file, ByteReader};
use crate::numerics::{dot, Matrix};
use crate::{Error, Result};

/// Training hyperparameters for [`train_svm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    /// Hinge-loss weight.
    pub c: f64,
    /// Maximum coordinate-descent sweeps per binary problem.
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 1000,
            seed: 0,
        }
    }
}

/// Relative duality gap and KKT violation at which a sweep loop stops.
const STOP_TOL: f64 = 1e-6;

/// Linear one-vs-all classifier over standardised features.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// classes×d weights, acting on standardised features.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub c: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-class scores from one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub normalized: bool,
}

impl ScoreVector {
    pub fn raw(scores: Vec<f64>) -> Self {
        ScoreVector {
            scores,
            normalized: false,
        }
    }

    /// Index of the largest score; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.scores)
    }
}

/// Diagnostics for one binary subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryFit {
    pub sweeps: usize,
    pub primal: f64,
    pub dual: f64,
    /// Largest projected-gradient magnitude at termination.
    pub kkt_violation: f64,
}

impl SvmModel {
    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn standardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Trains one binary SVM per class on the columns of `z` (d×n).
///
/// `labels` must be dense in `0..classes` with at least two classes.
pub fn train_svm(z: &Matrix, labels: &[usize], cfg: &SvmConfig) -> Result<SvmModel> {
    train_svm_with_diagnostics(z, labels, cfg).map(|(m, _)| m)
}

/// [`train_svm`] that also returns the per-class solver diagnostics.
pub fn train_svm_with_diagnostics(
    z: &Matrix,
    labels: &[usize],
    cfg: &SvmConfig,
) -> Result<(SvmModel, Vec<BinaryFit>)> {
    let (d, n) = z.shape();
    if labels.len() != n {
        return Err(Error::dims(format!(
            "{n} samples but {} labels",
            labels.len()
        )));
    }
    if !(cfg.c > 0.0) || !cfg.c.is_finite() {
        return Err(Error::invalid(format!("c must be positive, got {}", cfg.c)));
    }
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be at least 1"));
    }
    if z.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svm features"));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    if classes < 2 {
        return Err(Error::invalid("svm training needs at least two classes"));
    }
    let mut counts = vec![0usize; classes];
    labels.iter().for_each(|&l| counts[l] += 1);
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class {missing} has no training samples"
        )));
    }

    let mean = z.row_means();
    let std: Vec<f64> = (0..d)
        .map(|r| {
            let var = z.row(r).iter().map(|v| (v - mean[r]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    // Samples as rows with a trailing constant 1 for the bias.
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut x: Vec<f64> = (0..d).map(|r| (z[(r, j)] - mean[r]) / std[r]).collect();
            x.push(1.0);
            x
        })
        .collect();

    let mut weights = Matrix::zeros(classes, d);
    let mut biases = vec![0.0; classes];
    let mut fits = Vec::with_capacity(classes);
    for (k, bias) in biases.iter_mut().enumerate() {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == k { 1.0 } else { -1.0 })
            .collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (w, fit) = dual_coordinate_descent(&samples, &y, cfg.c, cfg.epochs, &mut rng);
        weights.row_mut(k).copy_from_slice(&w[..d]);
        *bias = w[d];
        fits.push(fit);
    }
    Ok((
        SvmModel {
            weights,
            biases,
            c: cfg.c,
            mean,
            std,
        },
        fits,
    ))
}

/// L1-loss SVM dual: minimise ½αᵀQα − Σα over 0 ≤ α ≤ c.
fn dual_coordinate_descent(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, BinaryFit) {
    let n = x.len();
    let dim = x[0].len();
    let q: Vec<f64> = x.iter().map(|xi| dot(xi, xi)).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut order: Vec<usize> = (0..n).collect();
    let mut fit = BinaryFit {
        sweeps: 0,
        primal: 0.0,
        dual: 0.0,
        kkt_violation: f64::INFINITY,
    };
    for sweep in 1..=epochs {
        order.shuffle(rng);
        for &i in &order {
            let g = y[i] * dot(&w, &x[i]) - 1.0;
            let pg = projected(g, alpha[i], c);
            if pg.abs() > 1e-15 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * y[i];
                w.iter_mut()
                    .zip(&x[i])
                    .for_each(|(wj, xj)| *wj += step * xj);
            }
        }

        let norm_sq = dot(&w, &w);
        let mut hinge = 0.0;
        let mut violation: f64 = 0.0;
        for i in 0..n {
            let margin = y[i] * dot(&w, &x[i]);
            hinge += (1.0 - margin).max(0.0);
            violation = violation.max(projected(margin - 1.0, alpha[i], c).abs());
        }
        let primal = 0.5 * norm_sq + c * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm_sq;
        fit = BinaryFit {
            sweeps: sweep,
            primal,
            dual,
            kkt_violation: violation,
        };
        if (primal - dual) <= STOP_TOL * primal.abs().max(1.0) && violation <= STOP_TOL {
            break;
        }
    }
    (w, fit)
}

fn projected(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

/// Raw margins `w_k·z_std + b_k` for one feature column.
pub fn predict_scores(m: &SvmModel, z: &[f64]) -> Result<ScoreVector> {
    if z.len() != m.dim() {
        return Err(Error::dims(format!(
            "svm expects {} features, got {}",
            m.dim(),
            z.len()
        )));
    }
    let zs = m.standardize(z);
    Ok(ScoreVector::raw(
        (0..m.classes())
            .map(|k| dot(m.weights.row(k), &zs) + m.biases[k])
            .collect(),
    ))
}

/// Predicted labels for every column of `z`.
pub fn predict_batch(m: &SvmModel, z: &Matrix) -> Result<Vec<usize>> {
    (0..z.cols())
        .map(|j| predict_scores(m, &z.column(j)).map(|s| s.argmax()))
        .collect()
}

/// Softmax of the scores. Already-normalised vectors are returned unchanged.
pub fn softmax_normalize(s: &ScoreVector) -> ScoreVector {
    if s.normalized {
        return s.clone();
    }
    let max = s.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = s.scores.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    ScoreVector {
        scores: exps.iter().map(|e| e / total).collect(),
        normalized: true,
    }
}

/// Per-class maximum of two normalised score vectors, then argmax.
pub fn max_fuse(s1: &ScoreVector, s2: &ScoreVector) -> Result<usize> {
    if s1.scores.len() != s2.scores.len() {
        return Err(Error::dims(format!(
            "cannot fuse {} classes with {}",
            s1.scores.len(),
            s2.scores.len()
        )));
    }
    if !s1.normalized || !s2.normalized {
        return Err(Error::invalid("max fusion needs normalised scores"));
    }
    let fused: Vec<f64> = s1
        .scores
        .iter()
        .zip(&s2.scores)
        .map(|(a, b)| a.max(*b))
        .collect();
    Ok(argmax(&fused))
}

const SVM_MAGIC: &[u8; 4] = b"M2FS";

impl SvmModel {
    /// `"M2FS"`, u32 classes, u32 d, then weights (classes×d), biases
    /// (1×classes), mean (d×1), std (d×1) and c (1×1) as matrix records.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SVM_MAGIC);
        put_u32(&mut out, self.classes() as u32);
        put_u32(&mut out, self.dim() as u32);
        self.weights.write_into(&mut out);
        Matrix::from_fn(1, self.classes(), |_, k| self.biases[k]).write_into(&mut out);
        Matrix::from_fn(self.dim(), 1, |r, _| self.mean[r]).write_into(&mut out);
        Matrix::from_fn(self.dim(), 1, |r, _| self.std[r]).write_into(&mut out);
        Matrix::filled(1, 1, self.c).write_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SvmModel> {
        let what = "svm file";
        let mut r = ByteReader::new(bytes, what);
        r.magic(SVM_MAGIC)?;
        let (classes, d) = (r.u32()? as usize, r.u32()? as usize);
        let weights = Matrix::read_from(&mut r)?;
        let biases = Matrix::read_from(&mut r)?;
        let mean = Matrix::read_from(&mut r)?;
        let std = Matrix::read_from(&mut r)?;
        let c = Matrix::read_from(&mut r)?;
        r.finish()?;
        if classes < 2 {
            return Err(Error::format(what, "fewer than two classes"));
        }
        if weights.shape() != (classes, d)
            || biases.shape() != (1, classes)
            || mean.shape() != (d, 1)
            || std.shape() != (d, 1)
            || c.shape() != (1, 1)
        {
            return Err(Error::format(what, "block shapes disagree with header"));
        }
        if std.as_slice().iter().any(|s| !(*s > 0.0)) || !(c[(0, 0)] > 0.0) {
            return Err(Error::format(what, "non-positive scale or c"));
        }
        Ok(SvmModel {
            weights,
            biases: biases.into_vec(),
            c: c[(0, 0)],
            mean: mean.into_vec(),
            std: std.into_vec(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SvmModel> {
        let path = path.as_ref();
        SvmModel::from_bytes(&read_file(path)?).map_err(|e| Error::InvalidFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}
