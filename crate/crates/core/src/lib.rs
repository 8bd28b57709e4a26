// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Small fixed-size matrix code reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod budget;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod kv;
pub mod physics;
pub mod rng;
pub mod sources;
pub mod units;

pub use error::{Error, Result};
