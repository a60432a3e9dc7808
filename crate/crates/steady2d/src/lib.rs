//! Numerical workbench for 2D steady Euler flows.
//!
//! A stream function ψ defines a steady flow when the Poisson bracket
//! {ψ, Δψ} vanishes. This crate measures that residual, classifies the
//! critical set of ψ by degree of vanishing, recovers the vorticity profile
//! F with Δψ = F(ψ) (or certifies that no single-valued profile exists),
//! fits fractional-power expansions of F at the range endpoints, runs a
//! moving-plane symmetry sweep, and constructs analytic tube flows around a
//! Jordan curve that are steady but admit no global profile.

pub mod calculus;
pub mod catalog;
pub mod critical;
pub mod domain;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod flux;
pub mod grid;
pub mod jet;
pub mod moving_plane;
pub mod report;
pub mod stencil;
pub mod tube;

pub use domain::Domain;
pub use error::{Error, Result};
pub use field::{Field, FieldRef, MultiIndex};
pub use grid::GridField;
