//! Full SVD via one-sided Jacobi rotations, with a deterministic sign
//! convention so repeated factorizations are bit-identical.

use crate::error::{RealizeError, Result};
use crate::matrix::Matrix;

/// Maximum number of Jacobi sweeps before giving up.
const MAX_SWEEPS: usize = 100;
/// Relative off-diagonal tolerance for convergence of column pairs.
const PAIR_TOL: f64 = 1.0e-15;

/// Full factorization `A = U * diag(s) * Vt` with square orthogonal `U`
/// (m x m) and `Vt` (n x n); `s` holds min(m, n) nonincreasing singular
/// values.
///
/// Sign convention: in every left singular vector the entry of largest
/// magnitude is nonnegative (ties broken by lowest index); the matching
/// right singular vector is flipped with it so the product is unchanged.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl SvdFactors {
    /// `U * diag(s) * Vt`, the reconstruction of the factored matrix.
    pub fn reconstruct(&self) -> Matrix {
        let m = self.u.rows();
        let n = self.vt.cols();
        let mut sig = Matrix::zeros(m, n);
        for (i, &si) in self.s.iter().enumerate() {
            sig[(i, i)] = si;
        }
        self.u.mul(&sig).mul(&self.vt)
    }

    /// Columns `0..k` of `U` as an m x k matrix.
    pub fn u_block(&self, k: usize) -> Matrix {
        Matrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)])
    }

    /// Rows `0..k` of `Vt` as a k x n matrix.
    pub fn vt_block(&self, k: usize) -> Matrix {
        Matrix::from_fn(k, self.vt.cols(), |i, j| self.vt[(i, j)])
    }
}

/// Full SVD of a nonempty matrix with finite entries.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(RealizeError::Dimension("svd of empty matrix".into()));
    }
    if !m.is_finite() {
        return Err(RealizeError::Dimension("svd input has non-finite entries".into()));
    }
    // Exact power-of-two scaling keeps column moments away from the
    // underflow/overflow range without perturbing the mantissas.
    let max_abs = m.max_abs();
    let scale = if max_abs > 0.0 {
        let exp = (max_abs.log2().floor() as i32).clamp(-1000, 1000);
        2.0_f64.powi(exp)
    } else {
        1.0
    };
    let scaled = m.scale(1.0 / scale);
    let mut f = if m.rows() >= m.cols() {
        svd_tall(&scaled)?
    } else {
        // A^T = U S V^T  =>  A = V S U^T
        let t = svd_tall(&scaled.transpose())?;
        SvdFactors { u: t.vt.transpose(), s: t.s, vt: t.u.transpose() }
    };
    for s in f.s.iter_mut() {
        *s *= scale;
    }
    normalize_signs(&mut f);
    Ok(f)
}

/// One-sided Jacobi on a tall (rows >= cols) matrix.
fn svd_tall(a: &Matrix) -> Result<SvdFactors> {
    let m = a.rows();
    let n = a.cols();
    debug_assert!(m >= n);

    // Work on columns of W = A * V, accumulating V.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut worst = 0.0_f64;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = col_moments(&w[p], &w[q]);
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                worst = worst.max(rel);
                if rel <= PAIR_TOL {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        // one more pass to measure the residual honestly
        let mut residual = 0.0_f64;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (alpha, beta, gamma) = col_moments(&w[p], &w[q]);
                if alpha > 0.0 && beta > 0.0 {
                    residual = residual.max(gamma.abs() / (alpha.sqrt() * beta.sqrt()));
                }
            }
        }
        if residual > PAIR_TOL {
            return Err(RealizeError::NumericalFailure {
                what: "jacobi svd".into(),
                residual,
            });
        }
        let _ = worst;
    }

    // Singular values and a stable descending order.
    let norms: Vec<f64> = w.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (slot, &j) in order.iter().enumerate() {
        if s[slot] > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / s[slot]).collect());
        } else {
            u_cols.push(vec![0.0; m]); // filled by completion below
        }
    }
    for _ in n..m {
        u_cols.push(vec![0.0; m]);
    }
    complete_basis(&mut u_cols, m);

    let u = Matrix::from_fn(m, m, |i, j| u_cols[j][i]);
    let vt = Matrix::from_fn(n, n, |i, j| v[order[i]][j]);
    Ok(SvdFactors { u, s, vt })
}

fn col_moments(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let (head, tail) = cols.split_at_mut(hi);
    let cp = &mut head[lo];
    let cq = &mut tail[0];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Fill all-zero slots with unit vectors orthogonal to the existing columns.
/// Candidates are coordinate vectors; the one with the largest residual is
/// taken each time, so the completion is deterministic.
fn complete_basis(cols: &mut [Vec<f64>], m: usize) {
    let filled: Vec<usize> = (0..cols.len())
        .filter(|&j| cols[j].iter().any(|&x| x != 0.0))
        .collect();
    let mut basis: Vec<Vec<f64>> = filled.iter().map(|&j| cols[j].clone()).collect();
    for j in 0..cols.len() {
        if cols[j].iter().any(|&x| x != 0.0) {
            continue;
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..m {
            let mut cand = vec![0.0; m];
            cand[k] = 1.0;
            for b in &basis {
                let dot: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
                for (c, y) in cand.iter_mut().zip(b) {
                    *c -= dot * y;
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(bn, _)| norm > *bn) {
                best = Some((norm, cand));
            }
        }
        let (norm, mut cand) = best.expect("nonempty candidate set");
        debug_assert!(norm > 0.0);
        // second orthogonalization pass for accuracy
        for b in &basis {
            let dot: f64 = cand.iter().zip(b).map(|(x, y)| x * y).sum();
            for (c, y) in cand.iter_mut().zip(b) {
                *c -= dot * y;
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        for c in cand.iter_mut() {
            *c /= norm;
        }
        cols[j] = cand.clone();
        basis.push(cand);
    }
}

/// Largest-magnitude entry of each left singular vector made nonnegative;
/// the paired right singular vector follows.
fn normalize_signs(f: &mut SvdFactors) {
    let m = f.u.rows();
    let n = f.vt.cols();
    let k = f.s.len();
    for j in 0..m {
        let mut imax = 0;
        let mut vmax = 0.0_f64;
        for i in 0..m {
            let a = f.u[(i, j)].abs();
            if a > vmax {
                vmax = a;
                imax = i;
            }
        }
        if f.u[(imax, j)] < 0.0 {
            for i in 0..m {
                f.u[(i, j)] = -f.u[(i, j)];
            }
            if j < k {
                for c in 0..n {
                    f.vt[(j, c)] = -f.vt[(j, c)];
                }
            }
        }
    }
    // rows of Vt beyond the singular pairs are free; fix them the same way
    for j in k..n {
        let mut imax = 0;
        let mut vmax = 0.0_f64;
        for i in 0..n {
            let a = f.vt[(j, i)].abs();
            if a > vmax {
                vmax = a;
                imax = i;
            }
        }
        if f.vt[(j, imax)] < 0.0 {
            for i in 0..n {
                f.vt[(j, i)] = -f.vt[(j, i)];
            }
        }
    }
}

/// Moore-Penrose pseudo-inverse, truncating singular values at
/// `rank_tol * s_1`. Pass `None` for the default max(m, n) * eps.
pub fn pinv(m: &Matrix, rank_tol: Option<f64>) -> Result<Matrix> {
    let f = svd(m)?;
    let tol = rank_tol.unwrap_or(m.rows().max(m.cols()) as f64 * f64::EPSILON);
    let s1 = f.s.first().copied().unwrap_or(0.0);
    let cut = tol * s1;
    let mut out = Matrix::zeros(m.cols(), m.rows());
    for (idx, &si) in f.s.iter().enumerate() {
        if si <= cut || si == 0.0 {
            continue;
        }
        for i in 0..m.cols() {
            let vi = f.vt[(idx, i)] / si;
            if vi == 0.0 {
                continue;
            }
            for j in 0..m.rows() {
                out[(i, j)] += vi * f.u[(j, idx)];
            }
        }
    }
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.first().copied().unwrap_or(0.0))
}

/// `||P1 - P2||` in the spectral norm; the sin-theta distance when both
/// arguments are orthogonal projectors.
pub fn op_norm_diff(p1: &Matrix, p2: &Matrix) -> Result<f64> {
    if p1.rows() != p2.rows() || p1.cols() != p2.cols() {
        return Err(RealizeError::Dimension(format!(
            "op_norm_diff shape mismatch: {}x{} vs {}x{}",
            p1.rows(),
            p1.cols(),
            p2.rows(),
            p2.cols()
        )));
    }
    spectral_norm(&p1.sub(p2))
}
