//! Numerical engine for quantum dynamics driven by Weyl curvature.
//!
//! The crate evolves a quantum state as a pair of real fields, the density
//! `ρ` and the action `S`, coupled through the Weyl scalar curvature of the
//! configuration space, and checks that evolution against an ordinary linear
//! wave-equation solver. On top of that it models the spin sector of a
//! rotating frame with conserved body-axis angular momentum, the exchange-path
//! topology of two identical frames, and the resulting (anti)symmetrization of
//! many-particle spinors.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); spin values and
//! winding sums use exact rationals. The `*64` aliases below fix the scalar to
//! `f64`, which is what the CLI and the acceptance checks use.

pub mod dynamics;
pub mod error;
pub mod exchange;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod presets;
pub mod qstate;
pub mod scalar;
pub mod spin;
pub mod statistics;

pub use error::{Error, Result};
pub use grid::{Axis, ComplexField, Field, Grid, ScalarField};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Axis64 = Axis<f64>;
pub type Field64 = Field<f64>;
pub type MetricChart64 = geometry::MetricChart<f64>;
pub type CqgState64 = qstate::CqgState<f64>;
pub type WaveField64 = qstate::WaveField<f64>;
pub type SolverParams64 = dynamics::SolverParams<f64>;
pub type ExternalFields64 = dynamics::ExternalFields<f64>;
