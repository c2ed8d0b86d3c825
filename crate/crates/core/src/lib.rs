//! Readable logical theories from probabilistic circuits.
//!
//! A probabilistic circuit over one-hot encoded catalog data is pruned until the
//! examples it still gives positive probability match a target set of
//! high-likelihood examples; the circuit's logical shadow is then simplified,
//! converted to a multi-valued CNF, scored for comprehensibility and emitted as a
//! database query.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod cli;
pub mod comprehensibility;
pub mod data;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod pruning;
pub mod putput;
pub mod synth;

pub use error::{Error, Result};
