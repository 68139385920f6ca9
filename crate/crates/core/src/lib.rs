// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arith;
pub mod contour;
pub mod error;
pub mod eval;
pub mod forms;
pub mod mp;
pub mod qseries;
pub mod zeros;

pub use error::{Error, Result};
pub use qseries::{ArithOp, Coeff, Domain, Operand, QSeries};
