//! Canonical correlation analysis and the two feature-fusion operators.
//!
//! CCA is solved in closed form: both feature sets are whitened with the
//! inverse square roots of their (ridge-regularised) covariances, and the
//! singular vectors of the whitened cross-covariance
//! `M = Σxx^{-1/2} Σxy Σyy^{-1/2}` give the canonical directions. The
//! singular values are the canonical correlations, and the variates
//! `X′ = Aᵀ(X − μx)`, `Y′ = Bᵀ(Y − μy)` have unit variance on the fitting
//! data (up to the ridge).

use std::path::Path;

use crate::cnn::FeatureMatrix;
use crate::io::{put_u32, read_file, write_file, ByteReader};
use crate::numerics::{covariances, dot, sym_eig, EigenDecomposition, Matrix, Ridge};
use crate::{Error, Result};

/// Singular values at or below this fraction of the largest are dropped.
const RANK_TOL: f64 = 1e-10;
/// Smallest-to-largest covariance eigenvalue ratio accepted as full rank.
const CONDITION_FLOOR: f64 = 1e-12;

/// Fitted canonical projection of two feature sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaTransform {
    /// p×d directions for the first set.
    pub a: Matrix,
    /// q×d directions for the second set.
    pub b: Matrix,
    /// Canonical correlations, non-increasing, in `[0, 1]`.
    pub correlations: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
}

/// Summed canonical variates, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub z: Matrix,
}

impl CcaTransform {
    pub fn dim(&self) -> usize {
        self.correlations.len()
    }

    pub fn p(&self) -> usize {
        self.a.rows()
    }

    pub fn q(&self) -> usize {
        self.b.rows()
    }

    /// `Aᵀ·(X − μx)`.
    pub fn project_x(&self, x: &Matrix) -> Result<Matrix> {
        project(&self.a, &self.mean_x, x, "x")
    }

    /// `Bᵀ·(Y − μy)`.
    pub fn project_y(&self, y: &Matrix) -> Result<Matrix> {
        project(&self.b, &self.mean_y, y, "y")
    }
}

fn project(dirs: &Matrix, mean: &[f64], data: &Matrix, which: &str) -> Result<Matrix> {
    if data.rows() != dirs.rows() {
        return Err(Error::dims(format!(
            "transform expects {} rows for {which}, got {}",
            dirs.rows(),
            data.rows()
        )));
    }
    dirs.t_matmul(&data.center_rows(mean)?)
}

/// `S^{-1/2}` from an eigendecomposition, rejecting near-singular input.
fn whitener(eig: &EigenDecomposition) -> Result<Matrix> {
    let max = eig.values[0];
    let min = *eig.values.last().unwrap();
    if !(max > 0.0) || min <= CONDITION_FLOOR * max {
        return Err(Error::RankDeficient(min));
    }
    Ok(eig.reconstruct_with(|l| l.powf(-0.5)))
}

/// Fits CCA on column-sample matrices `x` (p×n) and `y` (q×n).
///
/// `dims` caps the canonical dimension; by default it is `min(p, q)`. It is
/// further capped at the numerical rank of the whitened cross-covariance.
pub fn fit_cca(x: &Matrix, y: &Matrix, ridge: Ridge, dims: Option<usize>) -> Result<CcaTransform> {
    let cov = covariances(x, y, ridge)?;
    let (p, q) = (x.rows(), y.rows());
    let max_dims = p.min(q);
    let wanted = dims.unwrap_or(max_dims);
    if wanted == 0 || wanted > max_dims {
        return Err(Error::invalid(format!(
            "canonical dimension must be in 1..={max_dims}, got {wanted}"
        )));
    }

    let wx = whitener(&sym_eig(&cov.sxx)?)?;
    let wy = whitener(&sym_eig(&cov.syy)?)?;
    let m = wx.matmul(&cov.sxy)?.matmul(&wy)?;

    // SVD of M through the eigenvectors of the smaller Gram matrix; the
    // partner vectors follow as M·v/σ, which pairs them and fixes signs so
    // that every correlation is non-negative.
    let mt = m.transpose();
    let (u, v, correlations) = if p <= q {
        singular_pairs(&m, &mt, wanted)?
    } else {
        let (v, u, s) = singular_pairs(&mt, &m, wanted)?;
        (u, v, s)
    };

    Ok(CcaTransform {
        a: wx.matmul(&u)?,
        b: wy.matmul(&v)?,
        correlations,
        mean_x: x.row_means(),
        mean_y: y.row_means(),
    })
}

/// Leading left singular vectors of `m` (from `m·mᵀ`), the matching right
/// singular vectors `mᵀ·u / σ` re-orthonormalised, and the singular values.
fn singular_pairs(m: &Matrix, mt: &Matrix, wanted: usize) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let gram = m.matmul(mt)?;
    let gram = Matrix::from_fn(gram.rows(), gram.cols(), |i, j| {
        0.5 * (gram[(i, j)] + gram[(j, i)])
    });
    let eig = sym_eig(&gram)?;
    let sigma: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let top = sigma[0];
    let mut u_cols: Vec<Vec<f64>> = Vec::new();
    let mut v_cols: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for (i, &s) in sigma.iter().enumerate().take(wanted) {
        if !(top > 0.0) || s <= RANK_TOL * top {
            break;
        }
        let u = eig.vectors.column(i);
        let mut v: Vec<f64> = (0..mt.rows()).map(|r| dot(mt.row(r), &u) / s).collect();
        for prev in &v_cols {
            let proj = dot(prev, &v);
            v.iter_mut().zip(prev).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-6 {
            break;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        u_cols.push(u);
        v_cols.push(v);
        values.push(s.clamp(0.0, 1.0));
    }
    if values.is_empty() {
        return Err(Error::RankDeficient(top));
    }
    Ok((
        Matrix::from_columns(&u_cols)?,
        Matrix::from_columns(&v_cols)?,
        values,
    ))
}

/// Canonical variates of both sets, centred with the fitted means.
pub fn transform(t: &CcaTransform, x: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix)> {
    if x.cols() != y.cols() {
        return Err(Error::dims(format!(
            "x has {} samples, y has {}",
            x.cols(),
            y.cols()
        )));
    }
    Ok((t.project_x(x)?, t.project_y(y)?))
}

/// Canonical-correlation fusion `Z = X′ + Y′`.
pub fn fuse_sum(xp: &Matrix, yp: &Matrix) -> Result<FusedFeatures> {
    Ok(FusedFeatures { z: xp.add(yp)? })
}

/// Row-stacks two feature blocks observed on the same samples.
pub fn fuse_concat(f1: &FeatureMatrix, f2: &FeatureMatrix) -> Result<FeatureMatrix> {
    if f1.samples() != f2.samples() {
        return Err(Error::dims(format!(
            "cannot concatenate {} samples with {}",
            f1.samples(),
            f2.samples()
        )));
    }
    let source = match (f1.source_layer.is_empty(), f2.source_layer.is_empty()) {
        (true, _) => f2.source_layer.clone(),
        (_, true) => f1.source_layer.clone(),
        _ => format!("{}+{}", f1.source_layer, f2.source_layer),
    };
    Ok(FeatureMatrix::new(f1.data.vstack(&f2.data)?, source))
}

const CCA_MAGIC: &[u8; 4] = b"M2FC";

impl CcaTransform {
    /// `"M2FC"`, u32 p, q, d, then A, B, correlations (1×d), mean_x (p×1)
    /// and mean_y (q×1) as embedded matrix records.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CCA_MAGIC);
        for v in [self.p(), self.q(), self.dim()] {
            put_u32(&mut out, v as u32);
        }
        self.a.write_into(&mut out);
        self.b.write_into(&mut out);
        Matrix::from_fn(1, self.dim(), |_, c| self.correlations[c]).write_into(&mut out);
        Matrix::from_fn(self.p(), 1, |r, _| self.mean_x[r]).write_into(&mut out);
        Matrix::from_fn(self.q(), 1, |r, _| self.mean_y[r]).write_into(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CcaTransform> {
        let what = "cca file";
        let mut r = ByteReader::new(bytes, what);
        r.magic(CCA_MAGIC)?;
        let (p, q, d) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let a = Matrix::read_from(&mut r)?;
        let b = Matrix::read_from(&mut r)?;
        let corr = Matrix::read_from(&mut r)?;
        let mx = Matrix::read_from(&mut r)?;
        let my = Matrix::read_from(&mut r)?;
        r.finish()?;
        if a.shape() != (p, d)
            || b.shape() != (q, d)
            || corr.shape() != (1, d)
            || mx.shape() != (p, 1)
            || my.shape() != (q, 1)
        {
            return Err(Error::format(what, "block shapes disagree with header"));
        }
        if corr.as_slice().iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::format(what, "correlation outside [0, 1]"));
        }
        Ok(CcaTransform {
            a,
            b,
            correlations: corr.into_vec(),
            mean_x: mx.into_vec(),
            mean_y: my.into_vec(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CcaTransform> {
        let path = path.as_ref();
        CcaTransform::from_bytes(&read_file(path)?).map_err(|e| Error::InvalidFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn sample_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn identical_sets_are_perfectly_correlated() {
        let x = gaussian(3, 200, 1);
        let t = fit_cca(&x, &x, Ridge::Fixed(0.0), None).unwrap();
        assert_eq!(t.dim(), 3);
        assert!(t.correlations.iter().all(|&c| (c - 1.0).abs() < 1e-8));
        let (xp, yp) = transform(&t, &x, &x).unwrap();
        assert!(xp.sub(&yp).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn independent_sets_are_weakly_correlated() {
        for seed in 0..5 {
            let x = gaussian(2, 2000, 10 + seed);
            let y = gaussian(2, 2000, 100 + seed);
            let t = fit_cca(&x, &y, Ridge::Fixed(0.0), None).unwrap();
            assert!(t.correlations[0] < 0.3, "{:?}", t.correlations);
        }
    }

    #[test]
    fn variates_match_reported_correlations() {
        let latent = gaussian(2, 500, 3);
        let x = Matrix::from_fn(3, 500, |r, c| {
            latent[(r % 2, c)] + 0.5 * ((r * 500 + c) as f64).sin()
        });
        let noise = gaussian(2, 500, 4);
        let y = Matrix::from_fn(2, 500, |r, c| latent[(1 - r, c)] * 0.8 + noise[(r, c)]);
        let t = fit_cca(&x, &y, Ridge::Fixed(1e-12), None).unwrap();
        let (xp, yp) = transform(&t, &x, &y).unwrap();
        for i in 0..t.dim() {
            let c = sample_corr(xp.row(i), yp.row(i));
            assert!((c - t.correlations[i]).abs() < 1e-6);
        }
        assert!(t.correlations.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn training_mean_maps_to_zero() {
        let x = gaussian(3, 50, 5);
        let y = gaussian(2, 50, 6);
        let t = fit_cca(&x, &y, Ridge::default(), None).unwrap();
        let mean_col = Matrix::from_fn(3, 4, |r, _| t.mean_x[r]);
        assert!(t.project_x(&mean_col).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_without_ridge() {
        let mut x = gaussian(3, 40, 7);
        // third row duplicates the first
        let first = x.row(0).to_vec();
        x.row_mut(2).copy_from_slice(&first);
        let y = gaussian(2, 40, 8);
        assert!(matches!(
            fit_cca(&x, &y, Ridge::Fixed(0.0), None),
            Err(Error::RankDeficient(_))
        ));
        assert!(fit_cca(&x, &y, Ridge::default(), None).is_ok());
    }

    #[test]
    fn argument_errors() {
        let x = gaussian(2, 10, 1);
        assert!(fit_cca(&x, &gaussian(2, 11, 2), Ridge::default(), None).is_err());
        assert!(fit_cca(&x, &x, Ridge::default(), Some(3)).is_err());
        let t = fit_cca(&x, &x, Ridge::default(), None).unwrap();
        assert!(transform(&t, &gaussian(3, 4, 1), &gaussian(2, 4, 1)).is_err());
    }

    #[test]
    fn fuse_examples() {
        let xp = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let yp = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        assert_eq!(fuse_sum(&xp, &yp).unwrap().z.as_slice(), &[4.0, 6.0]);
        assert!(fuse_sum(&xp, &xp.scale(-1.0)).unwrap().z.max_abs() == 0.0);
        assert_eq!(fuse_sum(&xp, &Matrix::zeros(2, 1)).unwrap().z, xp);
        assert!(fuse_sum(&xp, &Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn concat_examples() {
        let f1 = FeatureMatrix::new(gaussian(2, 4, 1), "fc1");
        let f2 = FeatureMatrix::new(gaussian(3, 4, 2), "fc1");
        let c = fuse_concat(&f1, &f2).unwrap();
        assert_eq!(c.data.shape(), (5, 4));
        for j in 0..4 {
            let mut want = f1.data.column(j);
            want.extend(f2.data.column(j));
            assert_eq!(c.data.column(j), want);
        }
        assert_eq!(fuse_concat(&f1, &FeatureMatrix::empty(4)).unwrap(), f1);
        assert!(fuse_concat(&f1, &FeatureMatrix::empty(5)).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let t = fit_cca(
            &gaussian(3, 30, 1),
            &gaussian(2, 30, 2),
            Ridge::default(),
            None,
        )
        .unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"M2FC");
        assert_eq!(CcaTransform::from_bytes(&bytes).unwrap(), t);
        assert!(CcaTransform::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
