// `!(x > 0.0)` also rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod lattice_ops;
pub mod model;
pub mod nls;
pub mod reduction;
pub mod spectral;
pub mod symmetry;

pub use error::{Error, Result};
