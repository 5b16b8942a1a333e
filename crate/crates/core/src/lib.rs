//! Knowledge-aware click-through-rate prediction over adaptive
//! target-behavior relational graphs.
//!
//! The pipeline, bottom up:
//!
//! * [`kg`]: the triple store with inverse relations and item alignment.
//! * [`subgraph`]: per-sample graph connect and prune, and layered neighbor views.
//! * [`tape`], [`params`], [`gradcheck`]: reverse-mode differentiation, Adagrad, gradient checks.
//! * [`model`]: relation-aware extractor layers, behavior activation, the prediction MLP.
//! * [`train`], [`metrics`]: the training loop, AUC, ablations and node-count analysis.
//! * [`data`], [`synth`], [`validate`]: file formats, synthetic data, format checks.

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod kg;
pub mod metrics;
pub mod model;
pub mod params;
pub mod subgraph;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod tsv;
pub mod validate;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/knowledge-graph.md")]
    mod knowledge_graph {}
    #[doc = include_str!("../../../book/src/subgraph.md")]
    mod subgraph {}
    #[doc = include_str!("../../../book/src/tape.md")]
    mod tape {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
