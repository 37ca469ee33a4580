//! LU solves with partial pivoting for the small normal-equation systems.

use crate::error::{RealizeError, Result};
use crate::matrix::Matrix;

/// Solve `A X = B` for square `A`.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(RealizeError::Dimension("solve needs a square matrix".into()));
    }
    if a.rows() != b.rows() {
        return Err(RealizeError::Dimension("solve rhs row mismatch".into()));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);

    for k in 0..n {
        let mut piv = k;
        let mut pmax = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > pmax {
                pmax = v;
                piv = i;
            }
        }
        if pmax <= f64::EPSILON * scale * n as f64 {
            return Err(RealizeError::Singular(format!(
                "pivot {pmax:.3e} at column {k}"
            )));
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..x.cols() {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        for i in k + 1..n {
            let f = lu[(i, k)] / lu[(k, k)];
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }

    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut sum = x[(i, j)];
            for k in i + 1..n {
                sum -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = sum / lu[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.rows()))
}
