//! Word-level language tagging for Romanized code-mixed text with very
//! little training data.

pub mod artifact;
pub mod augment;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod nn;
pub mod pipeline;
pub mod synth;
pub mod taggers;
pub mod train;

pub use error::{Error, Result};
