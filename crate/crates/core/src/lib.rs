// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gradient;
pub mod harness;
pub mod identifier;
pub mod model;
pub mod so3;
pub mod solver;

pub use error::{Error, Result};
