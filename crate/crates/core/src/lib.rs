//! Simulation and analytic laws for Mittag-Leffler random flights, Lorentz
//! gases with Cox obstacles, and fractional kinetic equations.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomdiff;
pub mod error;
pub mod flights;
pub mod kinetics;
pub mod lorentz;
pub mod pointproc;
pub mod quad;
pub mod specfun;
pub mod stats;
pub mod streams;

pub use error::{Error, Result};
pub use quad::QuadratureSpec;
pub use specfun::FracOrder;
