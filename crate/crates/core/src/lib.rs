//! Strain time-constant (TC) estimation for ultrasound poroelastography.
//!
//! The pipeline synthesizes creep-strain stacks for a cylindrical sample with
//! a circular inclusion ([`phantom`]), corrupts them with per-frame Gaussian
//! noise and randomly placed 0 dB frames ([`degrade`]), denoises them either by
//! natural cubic spline reconstruction of the bad frames ([`spline`]) or by a
//! fixed-lag Kalman smoother ([`kalman`]), and fits the three-parameter creep
//! model `s(t) = eta + gamma * exp(-t / tau)` per pixel with Levenberg-Marquardt
//! ([`fit`]). [`eval`] scores the resulting TC images with percent relative
//! error and runs the full comparison grid.

pub mod degrade;
pub mod error;
pub mod eval;
pub mod fit;
pub mod io;
pub mod kalman;
pub mod map;
pub mod phantom;
pub mod spline;
pub mod stack;

pub use error::{Error, Result};
pub use map::PixelMap;
pub use stack::{StackKind, StrainStack};
