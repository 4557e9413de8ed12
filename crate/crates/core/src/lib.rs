//! Learned embeddings of Horn-logic atoms and score-guided backward chaining.
//!
//! The crate covers the whole loop: synthetic knowledge bases and queries,
//! difficulty-balanced triplet generation, a triplet-loss embedding network
//! with periodic hardest-half retraining, a goal/rule scoring network, a
//! backward-chaining reasoner with node accounting, and the evaluation
//! metrics used to compare them.

pub mod error;
pub mod logic;
pub mod synth;
pub mod triplets;
pub mod encoder;
pub mod neural;
pub mod reasoner;
pub mod metrics;
pub mod pipeline;

pub use error::{Error, Result};
