//! SISO state-space models, Markov parameters, canonical forms and the FIT
//! score.

use crate::error::{RealizeError, Result};
use crate::linalg::{self, pinv};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};

/// `x_{k+1} = A x_k + B u_k`, `y_k = C x_k` with scalar input and output.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a_mat: Matrix,
    pub b_vec: Matrix,
    pub c_vec: Matrix,
}

/// Ordered Markov parameters `g_0 .. g_{n-1}` with `g_i = C A^i B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovSequence {
    pub values: Vec<f64>,
}

/// Characteristic-polynomial coefficient row `[a_nx, ..., a_1]` of
/// `z^nx + a_1 z^{nx-1} + ... + a_nx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharPoly {
    pub coeffs: Vec<f64>,
}

impl CharPoly {
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficients reordered as `[a_1, ..., a_nx]` (descending powers).
    pub fn descending(&self) -> Vec<f64> {
        self.coeffs.iter().rev().copied().collect()
    }

    /// The extended row `[a_nx, ..., a_1, 1]`.
    pub fn extended(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        v.push(1.0);
        v
    }

    /// Largest root magnitude of the polynomial.
    pub fn max_root_magnitude(&self) -> f64 {
        linalg::max_root_magnitude(&self.descending())
    }

    /// Coefficients with roots outside the unit circle reflected inside.
    pub fn reflected_stable(&self) -> CharPoly {
        let desc = linalg::reflect_into_unit_disc(&self.descending());
        CharPoly { coeffs: desc.into_iter().rev().collect() }
    }
}

impl StateSpaceModel {
    pub fn new(a_mat: Matrix, b_vec: Matrix, c_vec: Matrix) -> Result<Self> {
        let nx = a_mat.rows();
        if a_mat.cols() != nx {
            return Err(RealizeError::Dimension("A must be square".into()));
        }
        if b_vec.rows() != nx || b_vec.cols() != 1 {
            return Err(RealizeError::Dimension("B must be nx x 1".into()));
        }
        if c_vec.rows() != 1 || c_vec.cols() != nx {
            return Err(RealizeError::Dimension("C must be 1 x nx".into()));
        }
        Ok(StateSpaceModel { a_mat, b_vec, c_vec })
    }

    pub fn order(&self) -> usize {
        self.a_mat.rows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::max_root_magnitude(&char_poly_of(self).descending())
    }

    /// Rank checks on the order-nx controllability and observability
    /// matrices, with a relative singular-value tolerance.
    pub fn is_minimal(&self, rel_tol: f64) -> bool {
        let nx = self.order();
        let mut ctrb = Matrix::zeros(nx, nx);
        let mut col = self.b_vec.clone();
        for j in 0..nx {
            for i in 0..nx {
                ctrb[(i, j)] = col[(i, 0)];
            }
            col = self.a_mat.mul(&col);
        }
        let mut obsv = Matrix::zeros(nx, nx);
        let mut row = self.c_vec.clone();
        for i in 0..nx {
            for j in 0..nx {
                obsv[(i, j)] = row[(0, j)];
            }
            row = row.mul(&self.a_mat);
        }
        let full_rank = |m: &Matrix| match crate::linalg::svd(m) {
            Ok(f) => {
                let s1 = f.s[0];
                s1 > 0.0 && f.s[nx - 1] > rel_tol * s1
            }
            Err(_) => false,
        };
        full_rank(&ctrb) && full_rank(&obsv)
    }
}

/// First `n` Markov parameters by iterated state propagation.
pub fn markov(model: &StateSpaceModel, n: usize) -> MarkovSequence {
    let mut values = Vec::with_capacity(n);
    let mut x = model.b_vec.clone();
    for _ in 0..n {
        values.push(model.c_vec.mul(&x)[(0, 0)]);
        x = model.a_mat.mul(&x);
    }
    MarkovSequence { values }
}

/// Coefficients of `det(zI - A)` by the Faddeev-LeVerrier recurrence,
/// returned as `[a_nx, ..., a_1]`.
pub fn char_poly_of(model: &StateSpaceModel) -> CharPoly {
    char_poly_of_matrix(&model.a_mat)
}

pub fn char_poly_of_matrix(a: &Matrix) -> CharPoly {
    let n = a.rows();
    assert_eq!(n, a.cols(), "characteristic polynomial needs a square matrix");
    let mut cs = Vec::with_capacity(n);
    let mut mk = a.clone();
    for k in 1..=n {
        let c = -mk.trace() / k as f64;
        cs.push(c);
        if k < n {
            let mut shifted = mk.clone();
            for i in 0..n {
                shifted[(i, i)] += c;
            }
            mk = a.mul(&shifted);
        }
    }
    cs.reverse();
    CharPoly { coeffs: cs }
}

/// Observer canonical pair: first column of `A` is `-a_1..-a_nx`, unit
/// superdiagonal, `C = [1 0 ... 0]`.
pub fn observer_canonical(a: &CharPoly) -> (Matrix, Matrix) {
    let nx = a.order();
    let mut a_mat = Matrix::zeros(nx, nx);
    for i in 0..nx {
        a_mat[(i, 0)] = -a.coeffs[nx - 1 - i];
        if i + 1 < nx {
            a_mat[(i, i + 1)] = 1.0;
        }
    }
    let mut c_vec = Matrix::zeros(1, nx);
    c_vec[(0, 0)] = 1.0;
    (a_mat, c_vec)
}

/// Extended observability matrix of `(c, a)` with `n` block rows.
pub fn observability_matrix(a_mat: &Matrix, c_vec: &Matrix, n: usize) -> Matrix {
    let nx = a_mat.rows();
    let mut o = Matrix::zeros(n, nx);
    let mut row = c_vec.clone();
    for i in 0..n {
        for j in 0..nx {
            o[(i, j)] = row[(0, j)];
        }
        row = row.mul(a_mat);
    }
    o
}

/// Least-squares `B` from the observer-canonical pair and the full Markov
/// column: `B = pinv(O_{n-1}) [g_0 ... g_{n-1}]^T`.
pub fn recover_b(a: &CharPoly, g: &MarkovSequence) -> Result<Matrix> {
    let nx = a.order();
    let n = g.values.len();
    if n < nx {
        return Err(RealizeError::Dimension(format!(
            "need at least nx = {nx} Markov parameters, got {n}"
        )));
    }
    let (a_mat, c_vec) = observer_canonical(a);
    let o = observability_matrix(&a_mat, &c_vec, n);
    let f = crate::linalg::svd(&o)?;
    let s1 = f.s[0];
    if s1 == 0.0 || f.s[nx - 1] <= nx as f64 * f64::EPSILON * s1 {
        return Err(RealizeError::RankDeficient {
            what: "observability matrix in B recovery".into(),
            sigma: f.s[nx - 1],
        });
    }
    Ok(pinv(&o, None)?.mul(&Matrix::col_vector(&g.values)))
}

/// Model assembled on observer canonical form from estimated coefficients.
pub fn assemble_observer_model(a: &CharPoly, g: &MarkovSequence) -> Result<StateSpaceModel> {
    let (a_mat, c_vec) = observer_canonical(a);
    let b_vec = recover_b(a, g)?;
    StateSpaceModel::new(a_mat, b_vec, c_vec)
}

/// FIT score over the first `horizon` Markov parameters of the true system:
/// `100 (1 - ||g - g_hat|| / ||g - mean(g)||)`.
pub fn fit(model_hat: &StateSpaceModel, model_true: &StateSpaceModel, horizon: usize) -> Result<f64> {
    let g_true = markov(model_true, horizon).values;
    let g_hat = markov(model_hat, horizon).values;
    let mean = g_true.iter().sum::<f64>() / horizon as f64;
    let denom = g_true.iter().map(|x| (x - mean).powi(2)).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(RealizeError::DegenerateReference);
    }
    let num = g_true
        .iter()
        .zip(&g_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - num / denom))
}

pub const DEFAULT_FIT_HORIZON: usize = 100;

/// Transient-growth constant `sup_tau ||A^tau|| / rho(A)^{tau/2}`, truncated
/// at `tau_max` terms. Requires a stable matrix.
pub fn phi_constant(model: &StateSpaceModel, tau_max: usize) -> Result<f64> {
    let rho = model.spectral_radius();
    if rho >= 1.0 {
        return Err(RealizeError::Unstable { rho });
    }
    // tracked in logs so rho^{tau/2} never underflows for large tau
    let mut log_best = 0.0_f64; // tau = 0 term: ||I|| / rho^0 = 1
    let mut best_tau = 0usize;
    let mut pow = Matrix::identity(model.order());
    for tau in 1..=tau_max {
        pow = pow.mul(&model.a_mat);
        let norm = crate::linalg::spectral_norm(&pow)?;
        if norm == 0.0 {
            break; // nilpotent: later powers stay zero
        }
        let log_ratio = norm.ln() - tau as f64 / 2.0 * rho.ln();
        if log_ratio > log_best {
            log_best = log_ratio;
            best_tau = tau;
        }
    }
    let best = log_best.exp();
    if best_tau * 10 >= tau_max * 9 {
        eprintln!(
            "warning: phi_constant supremum still increasing near tau_max = {tau_max} (argmax {best_tau})"
        );
    }
    Ok(best)
}

/// JSON shape for a state-space model: {"nx": .., "A": [[..]], "B": [[..]], "C": [[..]]}.
#[derive(Serialize, Deserialize)]
pub struct ModelJson {
    pub nx: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

impl From<&StateSpaceModel> for ModelJson {
    fn from(m: &StateSpaceModel) -> Self {
        ModelJson {
            nx: m.order(),
            a: m.a_mat.to_nested(),
            b: m.b_vec.to_nested(),
            c: m.c_vec.to_nested(),
        }
    }
}

impl TryFrom<ModelJson> for StateSpaceModel {
    type Error = RealizeError;

    fn try_from(j: ModelJson) -> Result<Self> {
        let a = Matrix::from_rows(&j.a)?;
        let b = Matrix::from_rows(&j.b)?;
        let c = Matrix::from_rows(&j.c)?;
        if a.rows() != j.nx {
            return Err(RealizeError::Dimension("nx does not match A".into()));
        }
        StateSpaceModel::new(a, b, c)
    }
}

impl Serialize for StateSpaceModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateSpaceModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let j = ModelJson::deserialize(deserializer)?;
        StateSpaceModel::try_from(j).map_err(serde::de::Error::custom)
    }
}

/// The two Jordan-type test systems `A = [[l, d], [0, l]]`, `B = [0 1]^T`,
/// `C = [1 0]`.
pub fn jordan_pair_system(lambda: f64, delta: f64) -> StateSpaceModel {
    StateSpaceModel::new(
        Matrix::from_rows(&[vec![lambda, delta], vec![0.0, lambda]]).unwrap(),
        Matrix::col_vector(&[0.0, 1.0]),
        Matrix::row_vector(&[1.0, 0.0]),
    )
    .unwrap()
}

pub fn system_one() -> StateSpaceModel {
    jordan_pair_system(0.1, 2.0)
}

pub fn system_two() -> StateSpaceModel {
    jordan_pair_system(0.9, 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_closed_form() {
        // g_k = k lambda^{k-1} delta for the Jordan pair
        let g = markov(&system_one(), 4).values;
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 2.0).abs() < 1e-15);
        assert!((g[2] - 0.4).abs() < 1e-15);
        assert!((g[3] - 0.06).abs() < 1e-15);

        let g2 = markov(&system_two(), 4).values;
        assert!((g2[1] - 10.0).abs() < 1e-12);
        assert!((g2[2] - 18.0).abs() < 1e-12);
        assert!((g2[3] - 24.3).abs() < 1e-12);
    }

    #[test]
    fn markov_nilpotent() {
        let m = StateSpaceModel::new(
            Matrix::zeros(2, 2),
            Matrix::col_vector(&[1.0, 2.0]),
            Matrix::row_vector(&[3.0, 4.0]),
        )
        .unwrap();
        let g = markov(&m, 4).values;
        assert_eq!(g[0], 11.0); // C B
        assert!(g[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn char_poly_values() {
        let a1 = char_poly_of(&system_one());
        assert!((a1.coeffs[0] - 0.01).abs() < 1e-15);
        assert!((a1.coeffs[1] + 0.2).abs() < 1e-15);
        let a2 = char_poly_of(&system_two());
        assert!((a2.coeffs[0] - 0.81).abs() < 1e-12);
        assert!((a2.coeffs[1] + 1.8).abs() < 1e-12);
        // (z-1)^2 for the identity
        let id = char_poly_of_matrix(&Matrix::identity(2));
        assert!((id.coeffs[0] - 1.0).abs() < 1e-15 && (id.coeffs[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn observer_canonical_layout() {
        let (a, c) = observer_canonical(&CharPoly { coeffs: vec![0.01, -0.2] });
        assert_eq!(a.row(0), &[0.2, 1.0]);
        assert_eq!(a.row(1), &[-0.01, 0.0]);
        assert_eq!(c.row(0), &[1.0, 0.0]);
        let (a0, _) = observer_canonical(&CharPoly { coeffs: vec![0.0, 0.0] });
        assert_eq!(a0.row(0), &[0.0, 1.0]);
        assert_eq!(a0.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn observer_canonical_round_trip() {
        let a = CharPoly { coeffs: vec![0.3, -0.7, 0.2] };
        let (a_mat, _c) = observer_canonical(&a);
        let back = char_poly_of_matrix(&a_mat);
        for (x, y) in a.coeffs.iter().zip(&back.coeffs) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn recover_b_exact_and_zero() {
        for sys in [system_one(), system_two()] {
            let g = markov(&sys, 20);
            let a = char_poly_of(&sys);
            let model = assemble_observer_model(&a, &g).unwrap();
            let g_back = markov(&model, 20);
            let err: f64 = g
                .values
                .iter()
                .zip(&g_back.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-8, "markov mismatch {err}");
        }
        let zeros = MarkovSequence { values: vec![0.0; 10] };
        let b = recover_b(&CharPoly { coeffs: vec![0.01, -0.2] }, &zeros).unwrap();
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn fit_anchors() {
        let sys = system_one();
        assert!((fit(&sys, &sys, 100).unwrap() - 100.0).abs() < 1e-12);
        // exact rebuild through the canonical form
        let g = markov(&sys, 20);
        let model = assemble_observer_model(&char_poly_of(&sys), &g).unwrap();
        assert!(fit(&model, &sys, 100).unwrap() >= 100.0 - 1e-6);
        // constant response has no FIT reference
        let degenerate = StateSpaceModel::new(
            Matrix::zeros(1, 1),
            Matrix::col_vector(&[0.0]),
            Matrix::row_vector(&[1.0]),
        )
        .unwrap();
        assert!(matches!(
            fit(&sys, &degenerate, 100),
            Err(RealizeError::DegenerateReference)
        ));
    }

    #[test]
    fn fit_mean_predictor_is_zero() {
        // model_hat whose response equals the broadcast mean of the true one:
        // true system y = [c, 0, 0, ...] has mean c/H; a one-state model with
        // A = 1 (marginally stable) and CB = mean reproduces the constant.
        let truth = StateSpaceModel::new(
            Matrix::zeros(1, 1),
            Matrix::col_vector(&[3.0]),
            Matrix::row_vector(&[1.0]),
        )
        .unwrap();
        let h = 100usize;
        let mean = 3.0 / h as f64;
        let constant = StateSpaceModel::new(
            Matrix::identity(1),
            Matrix::col_vector(&[mean]),
            Matrix::row_vector(&[1.0]),
        )
        .unwrap();
        let f = fit(&constant, &truth, h).unwrap();
        assert!(f.abs() < 1e-9, "mean predictor FIT = {f}");
    }

    #[test]
    fn phi_constant_cases() {
        // A = 0.5 I: ||A^t|| = 0.5^t, rho^{t/2} = 0.5^{t/2}, sup at t = 0
        let m = StateSpaceModel::new(
            Matrix::identity(2).scale(0.5),
            Matrix::col_vector(&[1.0, 0.0]),
            Matrix::row_vector(&[1.0, 0.0]),
        )
        .unwrap();
        assert!((phi_constant(&m, 500).unwrap() - 1.0).abs() < 1e-12);

        // A = 0 is nilpotent; only the tau = 0 term survives
        let z = StateSpaceModel::new(
            Matrix::zeros(2, 2),
            Matrix::col_vector(&[1.0, 0.0]),
            Matrix::row_vector(&[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(phi_constant(&z, 500).unwrap(), 1.0);

        // Jordan block: the tau = 1 term already exceeds 1
        let s2 = system_two();
        let lower = crate::linalg::spectral_norm(&s2.a_mat).unwrap() / s2.spectral_radius().sqrt();
        assert!(phi_constant(&s2, 500).unwrap() >= lower - 1e-12);

        let unstable = StateSpaceModel::new(
            Matrix::identity(1).scale(1.1),
            Matrix::col_vector(&[1.0]),
            Matrix::row_vector(&[1.0]),
        )
        .unwrap();
        assert!(matches!(phi_constant(&unstable, 500), Err(RealizeError::Unstable { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let sys = system_two();
        let s = serde_json::to_string(&sys).unwrap();
        assert!(s.contains("\"nx\":2"));
        let back: StateSpaceModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
    }
}
