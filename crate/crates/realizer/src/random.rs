//! Seeded random minimal stable systems for the Monte Carlo studies.

use crate::error::{RealizeError, Result};
use crate::matrix::Matrix;
use crate::model::StateSpaceModel;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const REJECTION_BUDGET: usize = 10_000;
/// Relative singular-value floor for the minimality rank checks.
const MINIMALITY_TOL: f64 = 1e-10;

/// Independent RNG stream for (seed, stream id); used so trials are
/// reproducible regardless of execution order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw a minimal stable system whose dominant pole magnitude lies in
/// `[rho_min, rho_max]`.
///
/// Construction: a real block-diagonal spectrum (random 1x1 signs or 2x2
/// rotation blocks, magnitudes i.i.d. in (0, rho_max)) conjugated by a
/// random orthogonal matrix; `B` entries are 5 * N(0,1), `C` entries N(0,1).
/// Draws are rejected until the dominant magnitude lands in the window and
/// both rank checks pass.
pub fn random_stable_system(
    nx: usize,
    rho_min: f64,
    rho_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<StateSpaceModel> {
    assert!(nx >= 1);
    assert!(0.0 <= rho_min && rho_min < rho_max && rho_max < 1.0);
    for _ in 0..REJECTION_BUDGET {
        let (block, rho) = random_spectrum_block(nx, rho_max, rng);
        if rho < rho_min || rho > rho_max {
            continue;
        }
        let q = random_orthogonal(nx, rng);
        let a = q.transpose().mul(&block).mul(&q);
        let b = Matrix::from_fn(nx, 1, |_, _| 5.0 * sample_normal(rng));
        let c = Matrix::from_fn(1, nx, |_, _| sample_normal(rng));
        let model = StateSpaceModel::new(a, b, c)?;
        if model.is_minimal(MINIMALITY_TOL) {
            return Ok(model);
        }
    }
    Err(RealizeError::SamplingBudget { attempts: REJECTION_BUDGET })
}

fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Block-diagonal real matrix with eigenvalue magnitudes i.i.d. in
/// (0, rho_max); complex pairs appear as 2x2 rotation blocks.
fn random_spectrum_block(nx: usize, rho_max: f64, rng: &mut ChaCha8Rng) -> (Matrix, f64) {
    let mut a = Matrix::zeros(nx, nx);
    let mut rho = 0.0_f64;
    let mut i = 0;
    while i < nx {
        let r: f64 = rng.gen_range(0.0..rho_max);
        rho = rho.max(r);
        if i + 1 < nx && rng.gen_bool(0.5) {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let (s, c) = theta.sin_cos();
            a[(i, i)] = r * c;
            a[(i, i + 1)] = r * s;
            a[(i + 1, i)] = -r * s;
            a[(i + 1, i + 1)] = r * c;
            i += 2;
        } else {
            a[(i, i)] = if rng.gen_bool(0.5) { r } else { -r };
            i += 1;
        }
    }
    (a, rho)
}

/// Orthogonal matrix from modified Gram-Schmidt on a Gaussian draw.
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let g = Matrix::from_fn(n, n, |_, _| sample_normal(rng));
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let mut v = g.col(j);
            for u in &cols {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            cols.push(v);
        }
        if ok {
            return Matrix::from_fn(n, n, |i, j| cols[j][i]);
        }
    }
}
