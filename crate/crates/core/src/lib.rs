//! Small-ball probability factorization for functional data.
//!
//! Curves sampled on a shared grid are decomposed by functional PCA; the
//! small-ball probability `P(‖X − x‖ < ε)` is then approximated by the
//! product of a surrogate density `f_d` of the first `d` principal
//! component scores, the volume of the `d`-dimensional ball and a
//! correction factor accounting for the truncated tail of the expansion.

// negated comparisons are used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod error;
pub mod experiments;
pub mod fda;
pub mod fpca;
pub mod io;
pub mod linalg;
pub mod processes;
pub mod smbp;

pub use error::{Error, Result};
pub use fda::{distance, inner_product, norm, Curve, FunctionalSample, Grid};
pub use fpca::{EigenSystem, ScoreMatrix};
