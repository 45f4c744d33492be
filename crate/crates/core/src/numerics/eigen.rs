//! Cyclic Jacobi eigensolver for real symmetric matrices.

use super::Matrix;
use crate::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted descending with matching unit eigenvectors stored as
/// the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let v = &self.vectors;
        let scaled: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += v[(i, k)] * scaled[k] * v[(j, k)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖S‖_F`. Each eigenvector is sign-normalised so that its
/// largest-magnitude component is positive.
pub fn sym_eig(s: &Matrix) -> Result<EigenDecomposition> {
    if !s.is_square() || s.rows() == 0 {
        return Err(Error::dims(format!(
            "eigendecomposition needs a non-empty square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let asym = s.max_asymmetry();
    if asym > SYMMETRY_TOL * s.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }

    let n = s.rows();
    // symmetrise so rounding noise below the tolerance cannot bias the result
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = Matrix::identity(n);
    let target = OFF_DIAGONAL_TOL * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = v.select_columns(&order);
    for c in 0..n {
        let mut pivot = 0.0f64;
        for r in 0..n {
            if vectors[(r, c)].abs() > pivot.abs() {
                pivot = vectors[(r, c)];
            }
        }
        if pivot < 0.0 {
            for r in 0..n {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Applies `A ← JᵀAJ`, `V ← VJ` for the plane rotation in (p, q).
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Inverse square root `V · diag(max(λ, eps)^(−1/2)) · Vᵀ` of a symmetric
/// positive semi-definite matrix.
///
/// Eigenvalues below `−1e-8 · max(1, λ_max)` are treated as evidence of a
/// non-PSD input.
pub fn inv_sqrt(s: &Matrix, eps: f64) -> Result<Matrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let eig = sym_eig(s)?;
    let scale = eig.values[0].abs().max(1.0);
    if let Some(&low) = eig.values.last() {
        if low < -1e-8 * scale {
            return Err(Error::NotPositiveSemiDefinite(low));
        }
    }
    Ok(eig.reconstruct_with(|l| l.max(eps).powf(-0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn diagonal_input() {
        let e = sym_eig(&Matrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_eq!(e.vectors, Matrix::identity(2));
    }

    #[test]
    fn two_by_two_characteristic_polynomial() {
        // λ² − 4λ + 3 = 0
        let s = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&s).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        assert!(approx(&e.reconstruct(), &s, 1e-14));
    }

    #[test]
    fn identity_four() {
        let e = sym_eig(&Matrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn rejects_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&s), Err(Error::NotSymmetric(_))));
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn inv_sqrt_examples() {
        assert!(approx(
            &inv_sqrt(&Matrix::identity(3), 1e-12).unwrap(),
            &Matrix::identity(3),
            1e-15
        ));
        let r = inv_sqrt(&Matrix::from_diag(&[4.0, 9.0]), 1e-12).unwrap();
        assert!(approx(&r, &Matrix::from_diag(&[0.5, 1.0 / 3.0]), 1e-15));
        let clamped = inv_sqrt(&Matrix::from_diag(&[1.0, 0.0]), 1e-6).unwrap();
        assert!(approx(&clamped, &Matrix::from_diag(&[1.0, 1000.0]), 1e-9));
    }

    #[test]
    fn inv_sqrt_rejects_indefinite() {
        let s = Matrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(
            inv_sqrt(&s, 1e-9),
            Err(Error::NotPositiveSemiDefinite(_))
        ));
    }
}
