//! Sparse forms, the exponent trapezoid and domination experiments.

mod dominate;
mod form;
mod region;

pub use dominate::*;
pub use form::*;
pub use region::*;
