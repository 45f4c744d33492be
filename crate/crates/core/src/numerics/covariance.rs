use super::Matrix;
use crate::{Error, Result};

/// Ridge term added to the diagonal of both within-set covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// Adds exactly this value.
    Fixed(f64),
    /// Adds `factor · trace(S) / m`, computed separately for each block.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-4)
    }
}

impl Ridge {
    fn amount(self, s: &Matrix) -> f64 {
        match self {
            Ridge::Fixed(l) => l,
            Ridge::Relative(f) => f * s.trace() / s.rows() as f64,
        }
    }

    fn validate(self) -> Result<()> {
        let v = match self {
            Ridge::Fixed(v) | Ridge::Relative(v) => v,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!(
                "ridge must be finite and >= 0, got {v}"
            )));
        }
        Ok(())
    }
}

/// Within- and between-set sample covariances of two feature sets observed
/// on the same `n` samples. `Σyx` is `sxyᵀ` and is not stored.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub sxx: Matrix,
    pub syy: Matrix,
    pub sxy: Matrix,
    /// Ridge actually added to `sxx`.
    pub ridge_x: f64,
    /// Ridge actually added to `syy`.
    pub ridge_y: f64,
}

/// Unbiased sample covariances of column-sample matrices `x` (p×n) and
/// `y` (q×n), with the ridge added to both diagonal blocks.
pub fn covariances(x: &Matrix, y: &Matrix, ridge: Ridge) -> Result<CovarianceSet> {
    ridge.validate()?;
    if x.cols() != y.cols() {
        return Err(Error::dims(format!(
            "x has {} samples, y has {}",
            x.cols(),
            y.cols()
        )));
    }
    if x.cols() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples, got {}",
            x.cols()
        )));
    }
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::dims("feature sets must have at least one row"));
    }
    let xc = x.center_rows(&x.row_means())?;
    let yc = y.center_rows(&y.row_means())?;
    let norm = 1.0 / (x.cols() - 1) as f64;

    let mut sxx = gram(&xc, norm);
    let mut syy = gram(&yc, norm);
    let sxy = xc.matmul_t(&yc)?.scale(norm);

    let ridge_x = ridge.amount(&sxx);
    let ridge_y = ridge.amount(&syy);
    add_diagonal(&mut sxx, ridge_x);
    add_diagonal(&mut syy, ridge_y);
    Ok(CovarianceSet {
        sxx,
        syy,
        sxy,
        ridge_x,
        ridge_y,
    })
}

/// `norm · A·Aᵀ`, computed on the upper triangle and mirrored.
fn gram(a: &Matrix, norm: f64) -> Matrix {
    let m = a.rows();
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = norm * super::matrix::dot(a.row(i), a.row(j));
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

fn add_diagonal(s: &mut Matrix, v: f64) {
    if v != 0.0 {
        for i in 0..s.rows() {
            s[(i, i)] += v;
        }
    }
}
