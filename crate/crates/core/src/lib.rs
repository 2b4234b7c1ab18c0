//! Attack-detector synthesis and stealthy-attack risk assessment for CACC
//! vehicle platoons.
//!
//! A platoon controller receives the preceding vehicle's desired acceleration
//! over a V2V link. An adversary on that link can inject false data; a
//! model-based monitor watches the residual between measured outputs and a
//! one-step prediction and raises an alarm when the quadratic test statistic
//! exceeds one. This crate synthesizes the estimator gain, the monitor
//! ellipsoid, and an outer ellipsoidal bound on everything a *stealthy*
//! attacker (one that never trips the monitor) can do to the vehicle state,
//! then scores the result against critical states (collision, overspeed).
//!
//! Pipeline: [`model`] builds the discrete-time platoon and extended
//! estimator models; [`lmi`] assembles and solves the semidefinite programs;
//! [`synth`] runs the three synthesis stages; [`runtime`] executes the
//! per-step estimator/monitor; [`reach`] evolves the reachable-set ellipsoid
//! and computes distances to critical states; [`attack`] and [`sim`] provide
//! Monte-Carlo validation of every bound.

use openblas_src as _;

pub mod attack;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod reach;
pub mod runtime;
pub mod sim;
pub mod synth;

pub use error::Error;
