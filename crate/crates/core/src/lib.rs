// `!(x > 0.0)` is the NaN-rejecting comparison used throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod broad_narrow;
pub mod bump;
pub mod config;
pub mod curve;
pub mod error;
pub mod fit;
pub mod knapp;
pub mod nikodym;
pub mod frequency;
pub mod oscillatory;
pub mod quadrature;
pub mod report;
pub mod roots;
pub mod spatial;
pub mod support;
pub mod testbench;

pub use error::{Error, Result};
