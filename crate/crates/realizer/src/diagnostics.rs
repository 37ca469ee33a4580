//! Sensitivity diagnostics (the ratio kappa and the gap delta), sin-theta
//! subspace distances, asymptotic covariance formulas, and an empirical
//! normality check.

use crate::error::{RealizeError, Result};
use crate::estimators::{ols_char_poly, tls_char_poly_ratio, wls_realize, WlsConfig};
use crate::hankel::{build_hankel, toeplitz_t, HankelSet};
use crate::linalg::{op_norm_diff, pinv, psd_factor, spectral_norm, sym_eig};
use crate::matrix::Matrix;
use crate::model::{char_poly_of, markov, phi_constant, CharPoly, StateSpaceModel};
use crate::random::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Singular-value diagnostics of a noisy Hankel set.
///
/// `kappa` = sigma_nx / sigma_nx(+) drives the TLS-vs-OLS accuracy gap on
/// well-conditioned problems; `delta` = sigma_nx(+) - sigma_{nx+1} measures
/// how close the TLS problem is to insoluble. `tls_gap` is the uniqueness
/// gap sigma_nx - sigma_{nx+1} of the full matrix.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub kappa: f64,
    pub delta: f64,
    pub tls_gap: f64,
    pub sigma_full: Vec<f64>,
    pub sigma_plus: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lemma3_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sin_theta: Option<SinThetaReport>,
}

pub fn sensitivity_report(h: &HankelSet) -> Result<DiagnosticsReport> {
    let nx = h.nx;
    let s1 = h.sigma(1);
    let sp = h.sigma_plus(nx);
    if s1 == 0.0 || sp == 0.0 {
        return Err(RealizeError::RankDeficient {
            what: "Hankel in sensitivity report".into(),
            sigma: sp,
        });
    }
    Ok(DiagnosticsReport {
        kappa: h.sigma(nx) / sp,
        delta: sp - h.sigma(nx + 1),
        tls_gap: h.sigma(nx) - h.sigma(nx + 1),
        sigma_full: h.svd_full.s.clone(),
        sigma_plus: h.svd_plus.s.clone(),
        lemma3_upper: None,
        sin_theta: None,
    })
}

/// Harness-mode report: adds the stability-based upper bound on
/// sigma_nx(+) and the sin-theta distances of the OLS/TLS estimates.
pub fn sensitivity_report_with_truth(
    h: &HankelSet,
    truth: &StateSpaceModel,
    tau_max: usize,
) -> Result<DiagnosticsReport> {
    let mut report = sensitivity_report(h)?;
    let g_true = markov(truth, h.n());
    let h_true = build_hankel(&g_true, h.f, h.nx)?;
    report.lemma3_upper = Some(lemma3_upper_bound(h, &h_true, truth, tau_max)?);
    if let (Ok(a_ols), Ok(a_tls)) = (ols_char_poly(h), tls_char_poly_ratio(h)) {
        report.sin_theta = Some(sin_theta_distances(h, &h_true, &a_ols, &a_tls)?);
    }
    Ok(report)
}

/// `Phi(A)^2 ||C|| ||B|| (1 - rho^{n-nx}) / (1 - rho) + ||H_plus_err||`.
pub fn lemma3_upper_bound(
    h_hat: &HankelSet,
    h_true: &HankelSet,
    truth: &StateSpaceModel,
    tau_max: usize,
) -> Result<f64> {
    let rho = truth.spectral_radius();
    if rho >= 1.0 {
        return Err(RealizeError::Unstable { rho });
    }
    let phi = phi_constant(truth, tau_max)?;
    let norm_c = spectral_norm(&truth.c_vec)?;
    let norm_b = spectral_norm(&truth.b_vec)?;
    let n = h_hat.n();
    let nx = h_hat.nx;
    let geom = (1.0 - rho.powi((n - nx) as i32)) / (1.0 - rho);
    let pert = spectral_norm(&h_hat.h_plus.sub(&h_true.h_plus))?;
    Ok(phi * phi * norm_c * norm_b * geom + pert)
}

/// sin-theta distances between estimated and true subspaces, each computed
/// two ways, with their perturbation bounds.
///
/// `*_dist_null` builds projectors from the spanning coefficient vectors of
/// the left null spaces; `*_dist_range` from the leading left singular
/// blocks. The two agree exactly (orthogonal complement invariance); the
/// normalized coefficient errors `*_err_norm` are reported alongside but are
/// not a subspace metric.
#[derive(Clone, Debug, Serialize)]
pub struct SinThetaReport {
    pub tls_err_norm: f64,
    pub ols_err_norm: f64,
    pub tls_dist_null: f64,
    pub tls_dist_range: f64,
    pub ols_dist_null: f64,
    pub ols_dist_range: f64,
    pub tls_bound: f64,
    pub ols_bound: f64,
}

fn unit_outer(v: &[f64]) -> Matrix {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n = v.len();
    Matrix::from_fn(n, n, |i, j| v[i] * v[j] / (norm * norm))
}

fn range_projector(f: &crate::linalg::SvdFactors, k: usize) -> Matrix {
    let u1 = f.u_block(k);
    u1.mul(&u1.transpose())
}

pub fn sin_theta_distances(
    h_hat: &HankelSet,
    h_true: &HankelSet,
    a_ols: &CharPoly,
    a_tls: &CharPoly,
) -> Result<SinThetaReport> {
    if h_hat.f != h_true.f || h_hat.p != h_true.p || h_hat.nx != h_true.nx {
        return Err(RealizeError::Dimension("hankel shapes differ".into()));
    }
    if h_hat.f != h_hat.nx {
        return Err(RealizeError::Dimension("sin-theta distances need f = nx".into()));
    }
    let nx = h_hat.nx;
    let a_true = ols_char_poly(h_true)?;
    let ext_true = a_true.extended();
    let norm_ext: f64 = ext_true.iter().map(|x| x * x).sum::<f64>().sqrt();

    let err = |a: &CharPoly| {
        a.coeffs
            .iter()
            .zip(&a_true.coeffs)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
            / norm_ext
    };

    // true null projector, from the spanning vector [a 1]
    let q_true = unit_outer(&ext_true);
    // true range projector, from the SVD block
    let p_true = range_projector(&h_true.svd_full, nx);

    // --- TLS side: approximant is the rank-nx truncation of H_hat
    let q_tls = unit_outer(&a_tls.extended());
    let p_tls = range_projector(&h_hat.svd_full, nx);
    let tls_dist_null = op_norm_diff(&q_tls, &q_true)?;
    let tls_dist_range = op_norm_diff(&p_tls, &p_true)?;

    // --- OLS side: approximant stacks H_plus over its row-space projection
    // of H_minus; its range projector comes from a fresh SVD of the stack.
    let v1 = h_hat.svd_plus.vt_block(nx); // nx x (p+1)
    let h_minus_bar = h_hat.h_minus.mul(&v1.transpose()).mul(&v1);
    let stacked = h_hat.h_plus.vstack(&h_minus_bar);
    let stacked_svd = crate::linalg::svd(&stacked)?;
    let p_ols = range_projector(&stacked_svd, nx);
    let q_ols = unit_outer(&a_ols.extended());
    let ols_dist_null = op_norm_diff(&q_ols, &q_true)?;
    let ols_dist_range = op_norm_diff(&p_ols, &p_true)?;

    let tls_bound = spectral_norm(&h_hat.h.sub(&h_true.h))? / h_hat.sigma(nx);
    let ols_bound = spectral_norm(&h_hat.h_plus.sub(&h_true.h_plus))? / h_hat.sigma_plus(nx);

    Ok(SinThetaReport {
        tls_err_norm: err(a_tls),
        ols_err_norm: err(a_ols),
        tls_dist_null,
        tls_dist_range,
        ols_dist_null,
        ols_dist_range,
        tls_bound,
        ols_bound,
    })
}

/// The asymptotic covariance formulas evaluated on exact (true-model) data.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticCovariances {
    pub p_ols: Vec<Vec<f64>>,
    pub p_wls: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `p_ols - p_wls`; nonnegative up to roundoff.
    pub min_eig_diff: f64,
}

pub fn asymptotic_covariances(
    h_true: &HankelSet,
    a_true: &CharPoly,
    p_g: &Matrix,
) -> Result<AsymptoticCovariances> {
    if h_true.f != h_true.nx {
        return Err(RealizeError::Dimension("covariances need f = nx".into()));
    }
    let n = h_true.n();
    if p_g.rows() != n || p_g.cols() != n {
        return Err(RealizeError::Dimension(format!("p_g must be {n} x {n}")));
    }
    let t = toeplitz_t(a_true, n);
    let (p_ols, p_wls) = covariance_pair(&h_true.h_plus, &t, p_g)?;
    let diff = p_ols.sub(&p_wls);
    let (eigs, _) = sym_eig(&diff)?;
    Ok(AsymptoticCovariances {
        p_ols: p_ols.to_nested(),
        p_wls: p_wls.to_nested(),
        min_eig_diff: eigs[0],
    })
}

/// `P_ols = pinv(H+)^T (T^T P_g T) pinv(H+)` and
/// `P_wls = (H+ (T^T P_g T)^{-1} H+^T)^{-1}`, on raw matrices so the square
/// H+ collapse case is testable directly.
pub(crate) fn covariance_pair(
    h_plus: &Matrix,
    t: &Matrix,
    p_g: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let w_inv = t.transpose().mul(&p_g.mul(t));
    let hpd = pinv(h_plus, None)?;
    let p_ols = hpd.transpose().mul(&w_inv.mul(&hpd));
    let w = crate::linalg::inverse(&w_inv)
        .map_err(|e| RealizeError::SingularWeighting(e.to_string()))?;
    let gram = h_plus.mul(&w.mul(&h_plus.transpose()));
    let p_wls = crate::linalg::inverse(&gram)
        .map_err(|e| RealizeError::SingularWeighting(e.to_string()))?;
    Ok((p_ols, p_wls))
}

/// One row of the normality sweep: sample covariances of the scaled errors
/// against the asymptotic formulas.
#[derive(Clone, Debug, Serialize)]
pub struct NormalityRow {
    pub scale: f64,
    pub trials_used: usize,
    pub failures: usize,
    pub rel_err_ols: f64,
    pub rel_err_tls: f64,
    pub rel_err_wls: f64,
    pub ols_tls_dist: f64,
    pub sample_cov_ols: Vec<Vec<f64>>,
    pub sample_cov_tls: Vec<Vec<f64>>,
    pub sample_cov_wls: Vec<Vec<f64>>,
}

impl NormalityRow {
    pub fn csv_header() -> &'static str {
        "scale,trials_used,failures,rel_err_ols,rel_err_tls,rel_err_wls,ols_tls_dist"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scale,
            self.trials_used,
            self.failures,
            self.rel_err_ols,
            self.rel_err_tls,
            self.rel_err_wls,
            self.ols_tls_dist
        )
    }
}

/// Empirical check of the asymptotic covariances: draw `g + s * e` with
/// `e ~ N(0, P_g)`, realize with OLS/TLS/WLS, and compare sample covariances
/// of `(a_hat - a)/s` with the formula predictions. Estimator failures are
/// counted and excluded, never fatal.
pub fn normality_check(
    model: &StateSpaceModel,
    p_g: &Matrix,
    n: usize,
    noise_scales: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<NormalityRow>> {
    if trials < 100 {
        return Err(RealizeError::Dimension("normality check needs trials >= 100".into()));
    }
    let nx = model.order();
    let a_true = char_poly_of(model);
    let g_true = markov(model, n);
    let h_true = build_hankel(&g_true, nx, nx)?;
    let t = toeplitz_t(&a_true, n);
    let (p_ols_formula, p_wls_formula) = covariance_pair(&h_true.h_plus, &t, p_g)?;
    let factor = psd_factor(p_g)?;

    let mut rows = Vec::with_capacity(noise_scales.len());
    for (scale_idx, &s) in noise_scales.iter().enumerate() {
        let per_trial: Vec<Option<[Vec<f64>; 3]>> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = stream_rng(seed, (scale_idx * trials + trial) as u64 + 1);
                let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let e = factor.mul(&Matrix::col_vector(&z));
                let mut g = g_true.clone();
                for (i, v) in g.values.iter_mut().enumerate() {
                    *v += s * e[(i, 0)];
                }
                let h = build_hankel(&g, nx, nx).ok()?;
                let scaled = |a: &CharPoly| -> Vec<f64> {
                    a.coeffs
                        .iter()
                        .zip(&a_true.coeffs)
                        .map(|(x, y)| if s > 0.0 { (x - y) / s } else { x - y })
                        .collect()
                };
                let ols = ols_char_poly(&h).ok()?;
                let tls = tls_char_poly_ratio(&h).ok()?;
                let wls = wls_realize(&h, &g, &WlsConfig::with_p_g(p_g.clone())).ok()?;
                Some([scaled(&ols), scaled(&tls), scaled(&wls.a_hat)])
            })
            .collect();

        let used: Vec<&[Vec<f64>; 3]> = per_trial.iter().flatten().collect();
        let failures = trials - used.len();
        let cov_of = |idx: usize| -> Matrix {
            let m = used.len();
            let mut mean = vec![0.0; nx];
            for u in &used {
                for (k, x) in u[idx].iter().enumerate() {
                    mean[k] += x / m as f64;
                }
            }
            let mut cov = Matrix::zeros(nx, nx);
            for u in &used {
                for i in 0..nx {
                    for j in 0..nx {
                        cov[(i, j)] += (u[idx][i] - mean[i]) * (u[idx][j] - mean[j]);
                    }
                }
            }
            cov.scale(1.0 / (m.max(2) - 1) as f64)
        };
        let (c_ols, c_tls, c_wls) = (cov_of(0), cov_of(1), cov_of(2));
        let rel = |c: &Matrix, p: &Matrix| c.sub(p).frobenius_norm() / p.frobenius_norm();
        rows.push(NormalityRow {
            scale: s,
            trials_used: used.len(),
            failures,
            rel_err_ols: rel(&c_ols, &p_ols_formula),
            rel_err_tls: rel(&c_tls, &p_ols_formula),
            rel_err_wls: rel(&c_wls, &p_wls_formula),
            ols_tls_dist: c_ols.sub(&c_tls).frobenius_norm() / p_ols_formula.frobenius_norm(),
            sample_cov_ols: c_ols.to_nested(),
            sample_cov_tls: c_tls.to_nested(),
            sample_cov_wls: c_wls.to_nested(),
        });
    }
    Ok(rows)
}
