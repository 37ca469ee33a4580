//! Deterministic dense linear-algebra kernels: SVD, pseudo-inverse,
//! symmetric eigendecomposition, linear solves.

mod eig;
mod poly;
mod solve;
mod svd;

pub use eig::{psd_factor, sym_eig};
pub use poly::{max_root_magnitude, monic_roots, reflect_into_unit_disc};
pub use solve::{inverse, solve};
pub use svd::{op_norm_diff, pinv, spectral_norm, svd, SvdFactors};
