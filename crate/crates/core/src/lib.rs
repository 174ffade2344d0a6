//! Sketch-and-solve least squares with oblivious subspace embeddings.
//!
//! The library is generic over the scalar type through [`Real`]; the
//! aliases at the crate root fix it to `f64`, which is what the harness and
//! the command-line tool use.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dense;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod instances;
pub mod regress;
pub mod scalar;
pub mod sketch;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat = dense::Matrix<f64>;
pub type Vec64 = dense::Vector<f64>;
pub type Sketch = sketch::SketchOperator<f64>;
