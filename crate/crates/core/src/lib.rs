//! Randomized periodogram estimation of quadratic variation for the mixed
//! model `X = W + B^H`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
mod fft;
pub mod gaussian_paths;
pub mod limit_theory;
pub mod mixing_laws;
pub mod montecarlo;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod summation;

pub use error::{Error, Result};
