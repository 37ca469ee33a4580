//! The least-squares realizers: null-space (OLS), range-space (TLS, in both
//! singular-vector and corrected-normal-equation forms), the balanced
//! realization, and the iteratively reweighted WLS refinement.

use crate::error::{RealizeError, Result};
use crate::hankel::{banded_nf, toeplitz_t, HankelSet};
use crate::linalg::{inverse, pinv, solve, spectral_norm};
use crate::matrix::Matrix;
use crate::model::{
    assemble_observer_model, char_poly_of_matrix, CharPoly, MarkovSequence, StateSpaceModel,
};
use serde::{Deserialize, Serialize};

/// Gap threshold below which the TLS problem is treated as insoluble:
/// the solution norm scales like 1/delta, so results below this are noise.
const TLS_GAP_TOL: f64 = 1e-8;
/// Shrinkage constant for the WLS weighting reliability blend.
const WLS_SHRINK: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ols,
    Tls,
    Wls,
    Kung,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Tls => "tls",
            Method::Wls => "wls",
            Method::Kung => "kung",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "tls" => Ok(Method::Tls),
            "wls" => Ok(Method::Wls),
            "kung" => Ok(Method::Kung),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// Estimated coefficients plus the assembled model and the least-squares
/// residual `||H_minus + a_hat H_plus||` (for general f, `||N_f(a_hat) H||`).
#[derive(Clone, Debug, Serialize)]
pub struct RealizationResult {
    pub method: Method,
    pub a_hat: CharPoly,
    pub model: StateSpaceModel,
    pub residual_norm: f64,
    /// Reweighting iterations performed (WLS only; 0 otherwise).
    pub iterations: usize,
    pub converged: bool,
}

/// Initial estimate feeding the WLS weighting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WlsInit {
    /// TLS when its preconditions hold, OLS otherwise.
    #[default]
    Auto,
    Ols,
    Tls,
}

#[derive(Clone, Debug)]
pub struct WlsConfig {
    /// Covariance of the Markov-parameter estimates (n x n, symmetric PSD).
    pub p_g: Matrix,
    pub max_iters: usize,
    /// Stop when the coefficient update drops below this.
    pub tol: f64,
    pub init: WlsInit,
}

impl WlsConfig {
    pub fn identity(n: usize) -> Self {
        WlsConfig { p_g: Matrix::identity(n), max_iters: 5, tol: 1e-10, init: WlsInit::Auto }
    }

    pub fn with_p_g(p_g: Matrix) -> Self {
        WlsConfig { p_g, max_iters: 5, tol: 1e-10, init: WlsInit::Auto }
    }
}

fn require_f_equals_nx(h: &HankelSet, what: &str) -> Result<()> {
    if h.f != h.nx {
        return Err(RealizeError::Dimension(format!(
            "{what} requires f = nx (got f = {}, nx = {})",
            h.f, h.nx
        )));
    }
    Ok(())
}

/// `||N_f(a) H||`; reduces to `||H_minus + a H_plus||` when f = nx.
pub fn residual_norm(h: &HankelSet, a: &CharPoly) -> f64 {
    spectral_norm(&banded_nf(a, h.f).mul(&h.h)).unwrap_or(f64::NAN)
}

/// Null-space estimate from the normal equations:
/// `a = -(H_minus H_plus^T (H_plus H_plus^T)^{-1})`.
pub fn ols_char_poly(h: &HankelSet) -> Result<CharPoly> {
    require_f_equals_nx(h, "ols")?;
    let nx = h.nx;
    let s1 = h.sigma_plus(1);
    let rank_tol = (h.p + 1).max(nx) as f64 * f64::EPSILON;
    if s1 == 0.0 || h.sigma_plus(nx) <= rank_tol * s1 {
        return Err(RealizeError::RankDeficient {
            what: "H_plus in OLS".into(),
            sigma: h.sigma_plus(nx),
        });
    }
    let gram = h.h_plus.mul(&h.h_plus.transpose());
    let rhs = h.h_plus.mul(&h.h_minus.transpose());
    let x = solve(&gram, &rhs)?;
    Ok(CharPoly { coeffs: (0..nx).map(|i| -x[(i, 0)]).collect() })
}

/// The same estimate as the minimum-norm solution built from the SVD of
/// `H_plus`: an independent computational route used for cross-checking.
pub fn ols_char_poly_minnorm(h: &HankelSet) -> Result<CharPoly> {
    require_f_equals_nx(h, "ols")?;
    let nx = h.nx;
    let f = &h.svd_plus;
    let s1 = f.s[0];
    let rank_tol = (h.p + 1).max(nx) as f64 * f64::EPSILON;
    if s1 == 0.0 || f.s[nx - 1] <= rank_tol * s1 {
        return Err(RealizeError::RankDeficient {
            what: "H_plus in OLS".into(),
            sigma: f.s[nx - 1],
        });
    }
    // a = -(H_minus V1) S1^{-1} U1^T
    let proj = h.h_minus.mul(&f.vt_block(nx).transpose()); // 1 x nx
    let mut a = vec![0.0; nx];
    for (j, aj) in a.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..nx {
            acc += proj[(0, k)] / f.s[k] * f.u[(j, k)];
        }
        *aj = -acc;
    }
    Ok(CharPoly { coeffs: a })
}

pub fn ols_realize(h: &HankelSet) -> Result<RealizationResult> {
    let a = ols_char_poly(h)?;
    let model = assemble_observer_model(&a, h.markov())?;
    Ok(RealizationResult {
        method: Method::Ols,
        residual_norm: residual_norm(h, &a),
        a_hat: a,
        model,
        iterations: 0,
        converged: true,
    })
}

fn tls_gap_check(h: &HankelSet) -> Result<f64> {
    let nx = h.nx;
    let delta = h.sigma_plus(nx) - h.sigma(nx + 1);
    let s1 = h.sigma(1);
    if s1 == 0.0 || delta < TLS_GAP_TOL * s1 {
        return Err(RealizeError::TlsGap { delta, sigma1: s1 });
    }
    Ok(delta)
}

/// Range-space estimate from the trailing left singular vector of `H`
/// (entry ratio form).
pub fn tls_char_poly_ratio(h: &HankelSet) -> Result<CharPoly> {
    require_f_equals_nx(h, "tls")?;
    let nx = h.nx;
    tls_gap_check(h)?;
    let u = h.svd_full.u.col(nx);
    let last = u[nx];
    if last.abs() <= 1e-12 {
        return Err(RealizeError::TlsNongeneric { entry: last });
    }
    Ok(CharPoly { coeffs: (0..nx).map(|i| u[i] / last).collect() })
}

/// Range-space estimate from the corrected normal equations
/// `a = -(H_minus H_plus^T (H_plus H_plus^T - sigma_{nx+1}^2 I)^{-1})`.
pub fn tls_char_poly_corrected(h: &HankelSet) -> Result<CharPoly> {
    require_f_equals_nx(h, "tls")?;
    let nx = h.nx;
    tls_gap_check(h)?;
    let sig2 = h.sigma(nx + 1).powi(2);
    let mut gram = h.h_plus.mul(&h.h_plus.transpose());
    for i in 0..nx {
        gram[(i, i)] -= sig2;
    }
    let rhs = h.h_plus.mul(&h.h_minus.transpose());
    let x = solve(&gram, &rhs)?;
    Ok(CharPoly { coeffs: (0..nx).map(|i| -x[(i, 0)]).collect() })
}

pub fn tls_realize(h: &HankelSet) -> Result<RealizationResult> {
    let a = tls_char_poly_ratio(h)?;
    let check = tls_char_poly_corrected(h)?;
    let scale = 1.0 + a.coeffs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mism = a
        .coeffs
        .iter()
        .zip(&check.coeffs)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if mism > 1e-6 * scale {
        return Err(RealizeError::NumericalFailure {
            what: "tls two-path consistency".into(),
            residual: mism,
        });
    }
    let model = assemble_observer_model(&a, h.markov())?;
    Ok(RealizationResult {
        method: Method::Tls,
        residual_norm: residual_norm(h, &a),
        a_hat: a,
        model,
        iterations: 0,
        converged: true,
    })
}

/// TLS for a future horizon beyond nx: coefficients from the trailing-block
/// partition of U, normalized to the row of the banded annihilator whose
/// trailing structure is `[a 1 0 ... 0]`.
pub fn tls_realize_general_f(h: &HankelSet) -> Result<RealizationResult> {
    if h.f == h.nx {
        return tls_realize(h);
    }
    let nx = h.nx;
    let tail = h.f + 1 - nx;
    let u = &h.svd_full.u;
    let u12 = Matrix::from_fn(nx, tail, |i, j| u[(i, nx + j)]);
    let u22 = Matrix::from_fn(tail, tail, |i, j| u[(nx + i, nx + j)]);
    let m_t = solve(&u22.transpose(), &u12.transpose()).map_err(|_| {
        RealizeError::RankDeficient {
            what: "nongeneric U22 partition in general-f TLS".into(),
            sigma: 0.0,
        }
    })?;
    // a is the row of [U12 U22^{-1}; I]^T whose trailing block is e_1
    let a = CharPoly { coeffs: m_t.row(0).to_vec() };
    let model = assemble_observer_model(&a, h.markov())?;
    Ok(RealizationResult {
        method: Method::Tls,
        residual_norm: residual_norm(h, &a),
        a_hat: a,
        model,
        iterations: 0,
        converged: true,
    })
}

/// Balanced realization: `O = U1 S1^{1/2}`, `C = S1^{1/2} V1^T`, with `A`
/// from the shift equation on `O` and `B`, `C` read off the factors.
pub fn kung_realize(h: &HankelSet) -> Result<RealizationResult> {
    let nx = h.nx;
    let s1 = h.sigma(1);
    let rank_tol = (h.p + 1).max(h.f + 1) as f64 * f64::EPSILON;
    if s1 == 0.0 || h.sigma(nx) <= rank_tol * s1 {
        return Err(RealizeError::RankDeficient {
            what: "Hankel in balanced realization".into(),
            sigma: h.sigma(nx),
        });
    }
    let f = &h.svd_full;
    let rows = h.f + 1;
    let obs = Matrix::from_fn(rows, nx, |i, j| f.u[(i, j)] * f.s[j].sqrt());
    let obs_up = obs.row_block(0, rows - 1);
    let obs_down = obs.row_block(1, rows);
    let a_mat = pinv(&obs_up, None)?.mul(&obs_down);
    let c_vec = obs.row_block(0, 1);
    let b_vec = Matrix::from_fn(nx, 1, |i, _| f.s[i].sqrt() * f.vt[(i, 0)]);
    let model = StateSpaceModel::new(a_mat, b_vec, c_vec)?;
    let a_hat = char_poly_of_matrix(&model.a_mat);
    Ok(RealizationResult {
        method: Method::Kung,
        residual_norm: residual_norm(h, &a_hat),
        a_hat,
        model,
        iterations: 0,
        converged: true,
    })
}

/// One weighted step with an explicit weighting matrix:
/// `a = -(H_minus W H_plus^T (H_plus W H_plus^T)^{-1})`.
/// With `W = I` this is exactly the OLS solution.
pub fn wls_step_with_weight(h: &HankelSet, w: &Matrix) -> Result<CharPoly> {
    require_f_equals_nx(h, "wls")?;
    let nx = h.nx;
    if w.rows() != h.p + 1 || w.cols() != h.p + 1 {
        return Err(RealizeError::Dimension(format!(
            "weight must be {} x {}",
            h.p + 1,
            h.p + 1
        )));
    }
    let hw = h.h_plus.mul(w); // nx x (p+1)
    let gram = hw.mul(&h.h_plus.transpose());
    let rhs = hw.mul(&h.h_minus.transpose());
    let x = solve(&gram, &rhs).map_err(|e| match e {
        RealizeError::Singular(s) => RealizeError::SingularWeighting(s),
        other => other,
    })?;
    Ok(CharPoly { coeffs: (0..nx).map(|i| -x[(i, 0)]).collect() })
}

/// `W(a) = (T(a)^T P_g T(a))^{-1}` for the residual Toeplitz map.
pub fn optimal_weight(a: &CharPoly, n: usize, p_g: &Matrix) -> Result<Matrix> {
    let t = toeplitz_t(a, n);
    let tpt = t.transpose().mul(&p_g.mul(&t));
    inverse(&tpt).map_err(|e| match e {
        RealizeError::Singular(s) => RealizeError::SingularWeighting(s),
        other => other,
    })
}

/// Plug-in covariance of the null-space coefficients under `p_g`:
/// `pinv(H_plus)^T T^T P_g T pinv(H_plus)`.
fn coefficient_covariance(h: &HankelSet, a: &CharPoly, p_g: &Matrix) -> Result<Matrix> {
    let hpd = pinv(&h.h_plus, None)?; // (p+1) x nx
    let t = toeplitz_t(a, h.n());
    let g = t.mul(&hpd); // n x nx
    Ok(g.transpose().mul(&p_g.mul(&g)))
}

/// Iteratively reweighted least squares on the null-space equations.
///
/// The weighting polynomial is stability-projected (roots reflected into the
/// unit disc) and shrunk toward zero when the plug-in coefficient covariance
/// says the current estimate cannot support it; `W(0)` recovers the OLS
/// weighting under white noise, so the refinement degrades gracefully at low
/// signal-to-noise ratios while keeping its asymptotic optimality.
pub fn wls_realize(h: &HankelSet, g: &MarkovSequence, cfg: &WlsConfig) -> Result<RealizationResult> {
    require_f_equals_nx(h, "wls")?;
    let n = g.values.len();
    if n != h.n() {
        return Err(RealizeError::Dimension(
            "markov sequence does not match the Hankel set".into(),
        ));
    }
    if cfg.p_g.rows() != n || cfg.p_g.cols() != n {
        return Err(RealizeError::Dimension(format!("p_g must be {n} x {n}")));
    }
    let sym_err = cfg.p_g.sub(&cfg.p_g.transpose()).frobenius_norm();
    if sym_err > 1e-8 * cfg.p_g.frobenius_norm().max(f64::MIN_POSITIVE) {
        return Err(RealizeError::SingularWeighting("p_g is not symmetric".into()));
    }

    let init = match cfg.init {
        WlsInit::Ols => ols_char_poly(h)?,
        WlsInit::Tls => tls_char_poly_ratio(h)?,
        WlsInit::Auto => match tls_char_poly_ratio(h) {
            Ok(a) => a,
            Err(_) => ols_char_poly(h)?,
        },
    };

    let mut a = init.reflected_stable();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let cov = coefficient_covariance(h, &a, &cfg.p_g)?;
        let signal: f64 = a.coeffs.iter().map(|x| x * x).sum();
        let gamma = if signal > 0.0 {
            (1.0 - WLS_SHRINK * cov.trace() / signal).max(0.0)
        } else {
            0.0
        };
        let a_weight = CharPoly {
            coeffs: a.coeffs.iter().map(|x| gamma * x).collect(),
        }
        .reflected_stable();
        let w = optimal_weight(&a_weight, n, &cfg.p_g)?;
        let a_new = wls_step_with_weight(h, &w)?.reflected_stable();
        let delta = a
            .coeffs
            .iter()
            .zip(&a_new.coeffs)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        a = a_new;
        iterations += 1;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    let model = assemble_observer_model(&a, g)?;
    Ok(RealizationResult {
        method: Method::Wls,
        residual_norm: residual_norm(h, &a),
        a_hat: a,
        model,
        iterations,
        converged,
    })
}
