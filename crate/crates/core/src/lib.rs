//! Numerical laboratory for nonexpansive self-mappings of unbounded
//! hyperbolic (in the Busemann/Reich–Shafrir sense) geodesic spaces.
//!
//! Layers, bottom up:
//! - [`geodesic`]: concrete space models, convex combinations, ray shooting,
//!   ball sampling, axiom verifiers and dense sequences.
//! - [`mapping`]: immutable constructor trees of self-mappings and sampled
//!   estimators (Lipschitz quotients, modulus of continuity, Rakotch gauges).
//! - [`metrics`]: admissible gauges and the three metric families on mapping
//!   space (series, weighted sup, pointwise).
//! - [`perturbation`]: explicit map surgeries and porosity witnesses.
//! - [`fixpoint`]: Picard iteration and Rakotch audits.
//! - [`lab`]: config-driven batch commands and reports behind the CLI.

pub mod error;
pub mod fixpoint;
pub mod geodesic;
pub mod lab;
pub mod mapping;
pub mod metrics;
pub mod perturbation;
pub mod sampling;
pub mod tolerances;

pub use error::{LabError, Result};
pub use geodesic::{ModelKind, Point, SpaceModel};
pub use mapping::NonexpMap;
pub use metrics::gauge::Gauge;
pub use metrics::MapMetric;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
