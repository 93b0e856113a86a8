// `!(x > 0.0)` deliberately also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlation;
pub mod dataio;
pub mod error;
pub mod mfdfa;
pub mod pipeline;
pub mod regression;
pub mod series;
pub mod spectrum;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
