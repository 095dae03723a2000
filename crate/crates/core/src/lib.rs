//! Randomized Kaczmarz iterations for real phase retrieval.
//!
//! The crate provides the phase-adapting Kaczmarz solver and its linear
//! counterpart, empirical certification of the admissibility conditions that
//! make the phase solver contract in conditional expectation, and a Monte
//! Carlo harness for escape probabilities and error decay.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissibility;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod io;
pub mod kaczmarz;
pub mod linalg;
pub mod measurements;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{dist_up_to_sign, geodesic_frac, sample_unit_sphere, sigma, Vector};
pub use measurements::{MeasurementSystem, PhaselessObservation, SignedObservation};
pub use rng::SeededRng;
