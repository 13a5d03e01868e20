//! Computational optimal transport: exact and entropic solvers, closed forms in
//! one dimension and for Gaussians, surrogate divergences, constructive W1
//! bounds, particle gradient flows and Wasserstein barycenters.

pub mod entropic;
pub mod barycenter;
pub mod bench;
pub mod cli;
pub mod bounds;
pub mod error;
pub mod exact;
pub mod flows;
pub mod gaussian;
pub mod json;
pub mod linalg;
pub mod measures;
pub mod plan;
pub mod surrogate;
pub mod univariate;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, GaussianMeasure, Measure, RngStream};
pub use plan::TransportPlan;

/// Library version embedded in CLI outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
