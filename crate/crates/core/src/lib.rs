//! Conformal energy of circle homeomorphisms.
//!
//! A homeomorphism `g` of the unit circle, written through its angle lift θ,
//! has conformal energy
//!
//! ```text
//! E(g) = -1/(2π²) ∬ log|g(ζ) - g(η)| dζ dη̄
//!      = 1 - 1/(2π²) ∬ log|sin(Δθ/2) / sin(Δt/2)| cos(t - s) dt ds,
//! ```
//!
//! normalized so that Moebius boundary maps have energy exactly 1. This
//! crate evaluates that functional, the quasi-Moebius bounds on it, its first
//! variation and critical-point residual, and an independent route through
//! the Douglas energy of the harmonic extension of the inverse map.
//!
//! Module map:
//! - [`maps`]: angle lifts of the map families, inversion, validation.
//! - [`energy`]: singularity-subtracted quadrature and the brute-force oracle.
//! - [`bounds`]: cross ratios, distortion gauges, quasi-Moebius bounds.
//! - [`variational`]: first variation, Euler-Lagrange residuals, descent.
//! - [`disk`]: Fourier boundary data, Douglas energy, Poisson field.
//! - [`cli`]: the map mini-language and the report-producing runner.

// `!(x > y)` is deliberate: NaN must fail these checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod bounds;
pub mod cli;
pub mod disk;
pub mod energy;
pub mod error;
pub mod maps;
pub mod quadrature;
pub mod variational;

pub use error::{Error, Result};
pub use maps::{validate, AngleMap, MapDiagnostics, Table};
