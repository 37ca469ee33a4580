//! Approximate realization of SISO state-space models from noisy Markov
//! parameters.
//!
//! Three least-squares routes to the characteristic polynomial of `A` from a
//! Hankel matrix over the data: the null-space normal equations (OLS), the
//! range-space total least-squares solution (TLS, equivalent to the balanced
//! realization up to similarity), and an iteratively reweighted refinement
//! (WLS) using the residual Toeplitz covariance. Sensitivity diagnostics
//! (the ratio kappa and gap delta, sin-theta subspace distances, asymptotic
//! covariances) explain when each route is preferable, and a seeded Monte
//! Carlo harness reproduces the comparison studies.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod hankel;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod plot;
pub mod random;

pub use error::{RealizeError, Result};
pub use estimators::{
    kung_realize, ols_realize, tls_realize, tls_realize_general_f, wls_realize, Method,
    RealizationResult, WlsConfig, WlsInit,
};
pub use hankel::{build_hankel, HankelSet};
pub use matrix::Matrix;
pub use model::{
    char_poly_of, fit, markov, observer_canonical, phi_constant, recover_b, CharPoly,
    MarkovSequence, StateSpaceModel,
};
