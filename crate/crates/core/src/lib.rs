// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod keyrate;
pub mod output;
pub mod physics;
pub mod protocol;
pub mod scenario;

pub use error::{Error, Result};
