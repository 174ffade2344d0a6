//! Deterministic dense linear algebra: storage, factorizations, exact least
//! squares and the Walsh–Hadamard transform. No randomness lives here.

mod fwht;
pub mod io;
mod matrix;
mod svd;

pub use fwht::{fwht, fwht_in_place, hadamard_entry};
pub(crate) use matrix::{axpy, dot};
pub use matrix::{Matrix, Vector};
pub use svd::{
    exact_lsq, operator_norm, orthonormalize_columns, pinv, singular_values, thin_svd, Svd, ThinFactorization,
};
