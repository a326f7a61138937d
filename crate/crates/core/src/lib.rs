//! Principal inertia components of discrete joint distributions and the
//! error-probability bounds built on them.

use serde::Serialize;

pub mod dist;
pub mod error;
pub mod error_rate;
pub mod fn_bounds;
pub mod inertia;
pub mod oracle;
pub mod pe_bounds;
pub mod verify;

pub use dist::{
    canonicalize, degrade, load_joint, pushforward, DegradationMap, JointDistribution,
    ProbabilityVector, StochasticMatrix, Surjection,
};
pub use error::{Axis, Error, Result};
pub use inertia::{decompose, InertiaDecomposition};

/// A bound before and after clipping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub raw: f64,
    pub value: f64,
}

impl BoundValue {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            value: raw.clamp(0.0, 1.0),
        }
    }
}
