//! Canonical moving frames and curvature invariants of monotone curves in
//! Lagrangian Grassmannians.
//!
//! The crate is layered: scalars and jets, Young diagram combinatorics, the
//! graded symplectic algebra of a diagram with its prolongation and
//! normalization spaces, and on top the analytic pipeline that lifts a curve,
//! normalizes the lift and extracts invariants.

pub mod algebra;
pub mod audit;
pub mod config;
pub mod curve;
pub mod diagram;
pub mod error;
pub mod frenet;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod normal;
pub mod scalar;

pub use error::{Error, Result};
