//! Numerical verification toolkit for conformal metrics g = e^{2f} g_{Sⁿ}
//! with nonnegative scalar curvature on the round sphere.
//!
//! The crate is organized bottom-up:
//!
//! - [`sphere`]: sampling, quadrature and geodesic primitives on Sⁿ;
//! - [`field`]: scalar fields, finite-difference calculus, spherical means;
//! - [`conformal`]: scalar curvature, volumes and integral bounds;
//! - [`mean`]: spherical-mean and ball-average monotonicity;
//! - [`truncation`]: truncations, essential infima and lower bounds;
//! - [`sequence`]: convergence reports and singular-set decomposition;
//! - [`scenarios`]: closed-form test families;
//! - [`suites`] and [`report`]: named verification suites and their output.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conformal;
pub mod error;
pub mod field;
pub mod mean;
pub mod quad1d;
pub mod report;
pub mod scenarios;
pub mod sequence;
pub mod sphere;
pub mod suites;
pub mod tolerances;
pub mod truncation;

pub use error::{Error, Result};
pub use field::{ScalarField, Smoothness, TangentVector};
pub use sphere::{CapSampling, RadialGrid, SamplingKind, SamplingSpec, SphereSampling};
