//! Joint multi-intent detection and slot filling with two decoding passes.
//!
//! A shared encoder feeds a first pass that produces token-level intent
//! probabilities and slot distributions. A second pass then decodes each
//! task again on a heterogeneous label graph built from the other task's
//! first-pass labels.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod gradsuite;
pub mod graph;
pub mod hgat;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod stage1;
pub mod stage2;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
