//! Digital-twin assisted mmWave V2X topology planning: channel model,
//! mobility scenarios, trajectory prediction, blockage-aware multi-route
//! planning and a discrete-time evaluation loop.

// `!(x > 0.0)` is used on purpose in validation so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod mobility;
pub mod prediction;
pub mod rng;
pub mod routing;
pub mod simengine;

pub use error::{Error, Result};
