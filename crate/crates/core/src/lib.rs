//! Continuous steering-vector fields from sparse, noisy measurements.
//!
//! The crate models the complex acoustic transfer gain `h(ω, m, s)` between a
//! source at `s` and a microphone at `m` as a zero-mean circularly-symmetric
//! complex Gaussian process. The covariance is a product of an inverse-quadratic
//! spectral factor, a rank-1 free-field factor and a rank-1 scattering factor
//! whose spherical-harmonics coefficients come from a small coordinate network.
//!
//! Everything here is `no_std` + `alloc`: geometry, spherical harmonics,
//! closed-form acoustics, the coordinate network with its manual reverse pass,
//! kernels, GP training and prediction, baselines, scene generators, metrics and
//! MVDR beamforming. File formats and the command line live in the `gpsteer`
//! companion crate.
#![no_std]
// `!(x > 0.0)` is deliberate: it rejects NaN alongside the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

extern crate alloc;

mod error;
mod prelude;

pub mod baselines;
pub mod beamform;
pub mod datagen;
pub mod geom;
pub mod gpr;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod nfield;
pub mod physics;
pub mod sphharm;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Three-dimensional position in meters.
pub type Vec3 = [f64; 3];
