#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod cli;
pub mod error;
pub mod eval;
pub mod features;
pub mod geodata;
pub mod hetgraph;
pub mod model;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
