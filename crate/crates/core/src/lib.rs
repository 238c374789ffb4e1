//! Error theory of cooperative map matching (CMM).
//!
//! Vehicles sharing a common GNSS bias each know they are on a road; every
//! road bounds the bias to a half-plane. The centroid of the intersection is
//! the CMM estimate, and its offset from the truth is the CMM error. This
//! crate computes that error exactly, via Monte Carlo, through closed-form
//! asymptotics, and at fleet scale over a spatial grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod asymptotics;
pub mod error;
pub mod error_models;
pub mod estimators;
pub mod experiments;
pub mod fleet;
pub mod geometry;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::Vec2;
