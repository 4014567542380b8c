//! Corpus engineering for document-level machine translation.
//!
//! The crate covers the whole data path of a larger-context MT system:
//!
//! * [`model`]: sentence pairs, four-sentence examples, monolingual windows,
//!   challenge items and the seeded per-example random streams.
//! * [`ingest`]: parallel-corpus JSONL parsing, subtitle merging, windowing
//!   and evaluation-overlap filtering.
//! * [`completion`]: filling missing context with random pairs, copies of the
//!   current pair, or model-generated context.
//! * [`generation`]: the generator / translator / scorer interfaces, toy
//!   implementations and the stdio subprocess protocol.
//! * [`backtranslation`]: tagged synthetic examples and corpus mixing.
//! * [`packing`]: separator concatenation and fixed-shape batches.
//! * [`eval`]: mteval-v13a BLEU and contrastive challenge-set accuracy.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.
//! Every per-example random draw comes from a stream derived from the global
//! seed and the example key, so outputs never depend on the worker count.

pub mod backtranslation;
pub mod completion;
pub mod error;
pub mod eval;
pub mod generation;
pub mod ingest;
pub mod jsonl;
pub mod model;
pub mod packing;
pub mod par;

pub use error::{Error, Result};
pub use model::{
    derive_rng, ChallengeItem, ContextualExample, MonoWindow, Provenance, ReservedTokens,
    RngStream, SentencePair,
};

/// Build identifier embedded in stats output.
pub fn build_id() -> String {
    let mode = if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    };
    format!("docctx {} ({mode})", env!("CARGO_PKG_VERSION"))
}
