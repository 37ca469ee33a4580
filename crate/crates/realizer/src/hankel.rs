//! Hankel matrices over Markov sequences, their partitions, and the
//! Toeplitz companions of the characteristic coefficients.

use crate::error::{RealizeError, Result};
use crate::linalg::{svd, SvdFactors};
use crate::matrix::Matrix;
use crate::model::{CharPoly, MarkovSequence};

/// Hankel matrix `h[i][j] = g_{i+j}` of shape (f+1) x (p+1) with
/// `f + p + 1 = n`, its partitions and cached SVD factors.
///
/// `h_plus` is the matrix with the last row removed (f rows); `h_minus`
/// holds the rows from `nx` on (a single row when f = nx).
#[derive(Clone, Debug)]
pub struct HankelSet {
    pub h: Matrix,
    pub h_plus: Matrix,
    pub h_minus: Matrix,
    pub f: usize,
    pub p: usize,
    pub nx: usize,
    pub svd_full: SvdFactors,
    pub svd_plus: SvdFactors,
    markov: MarkovSequence,
}

impl HankelSet {
    /// The sequence the set was built from.
    pub fn markov(&self) -> &MarkovSequence {
        &self.markov
    }

    pub fn n(&self) -> usize {
        self.markov.values.len()
    }

    /// sigma_i of the full Hankel (1-based index).
    pub fn sigma(&self, i: usize) -> f64 {
        self.svd_full.s[i - 1]
    }

    /// sigma_i of the partition `h_plus` (1-based index).
    pub fn sigma_plus(&self, i: usize) -> f64 {
        self.svd_plus.s[i - 1]
    }
}

/// Build the Hankel set for `f` block rows and model order `nx`.
pub fn build_hankel(g: &MarkovSequence, f: usize, nx: usize) -> Result<HankelSet> {
    let n = g.values.len();
    if nx == 0 {
        return Err(RealizeError::Dimension("nx must be positive".into()));
    }
    if f < nx {
        return Err(RealizeError::Dimension(format!("f = {f} must be >= nx = {nx}")));
    }
    if n < f + 1 + nx {
        return Err(RealizeError::Dimension(format!(
            "need n >= f + nx + 1 = {} Markov parameters, got {n}",
            f + nx + 1
        )));
    }
    let p = n - f - 1;
    let h = Matrix::from_fn(f + 1, p + 1, |i, j| g.values[i + j]);
    let h_plus = h.row_block(0, f);
    let h_minus = h.row_block(nx, f + 1);
    let svd_full = svd(&h)?;
    let svd_plus = svd(&h_plus)?;
    Ok(HankelSet {
        h,
        h_plus,
        h_minus,
        f,
        p,
        nx,
        svd_full,
        svd_plus,
        markov: g.clone(),
    })
}

/// Toeplitz map of the residual identity: n x (n - nx), first column
/// `[a_nx, ..., a_1, 1, 0, ...]^T`, first row `[a_nx, 0, ..., 0]`.
pub fn toeplitz_t(a: &CharPoly, n: usize) -> Matrix {
    let nx = a.order();
    assert!(n > nx, "toeplitz_t needs n > nx");
    let band = a.extended();
    let mut t = Matrix::zeros(n, n - nx);
    for j in 0..n - nx {
        for (k, &bk) in band.iter().enumerate() {
            t[(j + k, j)] = bk;
        }
    }
    t
}

/// Banded Toeplitz annihilator: (f+1-nx) x (f+1) with rows that are shifted
/// copies of `[a_nx, ..., a_1, 1]`.
pub fn banded_nf(a: &CharPoly, f: usize) -> Matrix {
    let nx = a.order();
    assert!(f >= nx, "banded_nf needs f >= nx");
    let band = a.extended();
    let mut nf = Matrix::zeros(f + 1 - nx, f + 1);
    for i in 0..f + 1 - nx {
        for (k, &bk) in band.iter().enumerate() {
            nf[(i, i + k)] = bk;
        }
    }
    nf
}
