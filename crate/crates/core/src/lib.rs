//! Streaming binary decision trees with confidence-interval split tests,
//! budgeted active-learning strategies, a synthetic stream generator and an
//! online evaluation harness.

pub mod active;
pub mod bounds;
pub mod coverage;
pub mod criteria;
pub mod data;
pub mod error;
pub mod eval;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
