//! Gaussian measures γ_t and γ∞, the covariance flow, samplers and quadrature.

mod covariance;
mod measure;
mod params;
mod quadrature;

pub use covariance::{covariance_at, lyapunov_solve};
pub use measure::{invariant_measure, measure_at, GaussianMeasure, SAMPLE_BATCH};
pub use params::{BlockShorthand, OuParams};
pub use quadrature::{
    gauss_quadrature, gauss_quadrature_capped, hermite_rule, QuadratureRule, DEFAULT_MAX_DIM,
    DEFAULT_ORDER,
};
