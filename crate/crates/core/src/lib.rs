//! Minimum-energy cooperative offloading for vehicles crossing a chain of
//! edge-computing roadside units.

// `!(a > b)` rejects NaN on purpose; dense kernels index by position.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod convex;
pub mod error;
pub mod model;
pub mod multi;
pub mod online;
pub mod oracle;
pub mod single;

pub use error::{OffloadError, Result};
