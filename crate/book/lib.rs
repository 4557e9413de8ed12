//! Each chapter of the guide is a module doc, so `cargo test` runs its listings.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/logic.md")]
pub mod logic {}
#[doc = include_str!("src/knowledge-bases.md")]
pub mod knowledge_bases {}
#[doc = include_str!("src/triplets.md")]
pub mod triplets {}
#[doc = include_str!("src/embeddings.md")]
pub mod embeddings {}
#[doc = include_str!("src/reasoning.md")]
pub mod reasoning {}
#[doc = include_str!("src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("src/pipeline.md")]
pub mod pipeline {}
