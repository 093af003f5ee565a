// negated comparisons are used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod blowup_family;
pub mod cli;
pub mod closed_forms;
pub mod error;
pub mod expansion_verify;
pub mod fit;
pub mod linearized_modes;
pub mod ode_engine;
pub mod quadrature;

pub use error::{Error, Result};
