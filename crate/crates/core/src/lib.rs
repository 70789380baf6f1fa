//! Numerical laboratory for sparse bounds of pseudodifferential operators
//! and oscillatory multipliers on a periodic lattice.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod dyadic;
pub mod error;
pub mod func;
pub mod maximal;
pub mod multiplier;
pub mod pdo;
pub mod sparse;
pub mod symbol;
pub mod weights;

pub use error::{Error, Result};
