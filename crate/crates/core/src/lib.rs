//! Closed geodesics on finite-area hyperbolic surfaces: enumeration up to a
//! length cutoff, their mutual and self intersection points, cusp excursions,
//! and the statistics used to check equidistribution of those points.
//!
//! The crate is organised bottom-up:
//!
//! - [`hyperbolic`]: Möbius maps and upper half-plane geometry.
//! - [`surface`]: concrete surfaces given by a fundamental polygon and side pairings.
//! - [`words`]: cyclic words in the generators, canonical forms.
//! - [`enumerate`]: all closed geodesics of length at most `T`, orbit counting.
//! - [`cache`]: on-disk cache of enumerated classes.
//! - [`chain`]: a closed geodesic flattened into chords of the fundamental polygon.
//! - [`crossings`]: transverse intersection points among chains.
//! - [`cusp`]: excursions into the cusp neighbourhood.
//! - [`liouville`]: closed-form Liouville measure computations.
//! - [`partition`], [`stats`], [`harness`]: the equidistribution checks.

// `!(x > 0.0)` is how range guards reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod chain;
pub mod crossings;
pub mod cusp;
pub mod enumerate;
pub mod error;
pub mod harness;
pub mod hyperbolic;
pub mod liouville;
pub mod par;
pub mod partition;
pub mod quadrature;
pub mod stats;
pub mod surface;
pub mod tolerance;
pub mod words;

pub use error::{Error, Result};
pub use par::Exec;
