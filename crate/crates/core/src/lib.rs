//! Jet calculus, Hoelder-norm estimation, diffeomorphism groups, and flows
//! of time-dependent vector fields on `R^d` (d <= 3), at desk scale.

pub mod error;
pub mod fields;
pub mod flow;
pub mod group;
pub mod hoelder;
pub mod jets;
pub mod pathology;
pub mod samplers;
pub mod scalar;
pub mod trouve;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete aliases for the working scalar type.
pub type Jet64 = jets::Jet<f64>;
pub type Tensor64 = jets::tensor::Tensor<f64>;
pub type Field64 = jets::evaluator::JetEvaluator<f64>;
pub type Box64 = jets::evaluator::BoxRegion<f64>;
