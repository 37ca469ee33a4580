//! Symmetric eigendecomposition (cyclic Jacobi) and a PSD square-root factor.

use crate::error::{RealizeError, Result};
use crate::matrix::Matrix;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix: `m * Q = Q * diag(lambda)`,
/// eigenvalues nondecreasing. The input is symmetrized internally but must
/// satisfy `||m - m^T|| <= 1e-8 ||m||`.
pub fn sym_eig(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if m.rows() != m.cols() {
        return Err(RealizeError::Dimension(format!(
            "sym_eig needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.sub(&m.transpose()).frobenius_norm();
    if asym > 1e-8 * m.frobenius_norm().max(f64::MIN_POSITIVE) {
        return Err(RealizeError::Dimension(
            "sym_eig input is not symmetric within tolerance".into(),
        ));
    }
    let n = m.rows();
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut q = Matrix::identity(n);
    let scale = a.frobenius_norm();

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for r in p + 1..n {
                off += a[(p, r)] * a[(p, r)];
            }
        }
        if (2.0 * off).sqrt() <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for r in p + 1..n {
                let apr = a[(p, r)];
                if apr.abs() <= f64::EPSILON * scale * 1e-2 {
                    continue;
                }
                let tau = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // A <- J^T A J on rows/cols p, r
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let ark = a[(r, k)];
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap().then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok((eigenvalues, vectors))
}

/// Factor `F` with `F F^T = m` for a symmetric PSD matrix (eigenvalues
/// clamped at zero). Used to draw correlated Gaussian vectors.
pub fn psd_factor(m: &Matrix) -> Result<Matrix> {
    let (vals, q) = sym_eig(m)?;
    let n = m.rows();
    Ok(Matrix::from_fn(n, n, |i, j| {
        q[(i, j)] * vals[j].max(0.0).sqrt()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal() {
        let (vals, _) = sym_eig(&Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exchange_matrix() {
        let (vals, q) = sym_eig(&Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        // residual m*Q - Q*diag
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mut d = Matrix::zeros(2, 2);
        d[(0, 0)] = vals[0];
        d[(1, 1)] = vals[1];
        let resid = m.mul(&q).sub(&q.mul(&d)).frobenius_norm();
        assert!(resid < 1e-13);
    }

    #[test]
    fn non_square_rejected() {
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn asymmetric_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(sym_eig(&m).is_err());
    }

    #[test]
    fn psd_factor_reproduces() {
        let b = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let m = b.mul(&b.transpose());
        let f = psd_factor(&m).unwrap();
        assert!(f.mul(&f.transpose()).sub(&m).frobenius_norm() < 1e-12);
    }
}
