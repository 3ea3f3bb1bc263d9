//! Maxwell–Bloch simulation of two-pulse photon echoes in an inhomogeneously
//! broadened open two-level medium, with a spectral hole burnt beforehand to
//! slow the data and rephasing pulses down.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bloch;
pub mod burn;
pub mod config;
pub mod error;
pub mod model;
pub mod propagate;
pub mod scenarios;
pub mod svg;

pub use error::{Error, Result};
