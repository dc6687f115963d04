//! Bilinear Koopman surrogate models for a differential-drive robot.
//!
//! The crate learns lifted linear operators from trajectory snapshots with
//! extended dynamic mode decomposition (eDMD), combines them into an
//! input-dependent bilinear surrogate, and benchmarks the surrogate against
//! the nominal unicycle kinematics and an imperfect-hardware emulator.
//!
//! Module map:
//! - [`types`]: poses, inputs, control bases, the motion plane, angle wrapping.
//! - [`dynamics`]: unicycle kinematics, RK4, closed-form flow, hardware emulator.
//! - [`dictionary`]: monomial observables, lifting, gradients, projection.
//! - [`estimator`]: least-squares operator, generator and eDMDc fits.
//! - [`surrogate`]: SUR1/SUR2 rollouts with the orientation wrap protocol.
//! - [`sampling`]: i.i.d. and trajectory-based training-data collection.
//! - [`evaluation`]: test scenarios, error metrics, multi-run statistics.
//! - [`cli`]: configuration, commands and experiment recipes.

pub mod cli;
pub mod dictionary;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod io;
pub mod sampling;
pub mod surrogate;
pub mod types;

pub use error::{Error, Result};
