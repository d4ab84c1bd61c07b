#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod eventgen;
pub mod experiment;
pub mod features;
pub mod io_util;
pub mod models;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
