//! Perceptually aligned noise schedules for continuous-time (EDM-style)
//! diffusion.
//!
//! The crate profiles how structural similarity (SSIM) decays as images are
//! corrupted with additive Gaussian noise, picks the sigma-space transform
//! `φ` under which that decay is most linear, builds noise schedules by
//! interpolating linearly in `φ`-space, and integrates the reverse
//! probability-flow ODE with Euler or Heun steps.
//!
//! Everything here is pure computation over in-memory buffers and works
//! without `std` (an allocator is required). File formats, parallel drivers
//! and the command line live in the companion `sigmascale` crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod conditioning;
mod error;
mod filter;
pub mod fit;
pub mod image;
mod linalg;
pub mod metrics;
pub mod precondition;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
pub use image::{DiffusionTensor, ImageBuffer};
pub use schedule::{Order, SigmaSchedule};
pub use transforms::TransformSpec;

/// Default lower end of the noise range.
pub const SIGMA_MIN: f64 = 0.002;
/// Default upper end of the noise range.
pub const SIGMA_MAX: f64 = 80.0;
/// Default EDM schedule exponent.
pub const RHO: f64 = 7.0;
/// Default data standard deviation used by the preconditioner.
pub const SIGMA_DATA: f64 = 0.5;
