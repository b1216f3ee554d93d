//! Heterogeneous network embedding guided by multiple meta-paths.
//!
//! Load a [`graph::TypedGraph`], pick meta-paths with
//! [`metapath::select_initial`], train with [`trainer::train`], then rank
//! held-out links, classify nodes or export per-meta-path embeddings with the
//! [`eval`] module. The guide in `book/` walks through each step.

pub mod eval;
pub mod graph;
pub mod metapath;
pub mod model;
pub mod sampler;
pub mod synthetic;
pub mod trainer;

/// The guide's Rust snippets, compiled and run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/metapaths.md")]
    mod metapaths {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
