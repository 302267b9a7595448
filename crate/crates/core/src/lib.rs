//! Ornstein–Uhlenbeck semigroups: covariance flows, kernels with respect to the
//! invariant measure, canonical reductions of normal operators, maximal-operator
//! scans and grid certification of pointwise kernel bounds.

pub mod config;
pub mod error;
pub mod gaussian;
pub mod kernels;
pub mod matrix;
pub mod maximal;
pub mod mc;
pub mod normal;

pub use error::{Error, Result};
