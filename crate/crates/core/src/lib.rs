//! Hierarchical ranking for answer selection.
//!
//! Three ranking objectives (point, pair, list) are trained jointly over a
//! compare-aggregate network and combined by multi-task learning (MTL),
//! ranking integration (RI) or progressive ranking integration (PRI).

pub mod backbone;
pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
pub mod ranking;
pub mod schemes;

pub use error::{Error, Result};
