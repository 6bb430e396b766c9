#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conic;
pub mod error;
pub mod harness;
pub mod instance;
pub mod queueing;
pub mod rng;
pub mod simulator;
pub mod solver;

pub use error::{Error, Result};
