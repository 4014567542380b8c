//! Pluggable model interfaces.
//!
//! Real neural models live out of process and are reached through
//! [`external`]; [`toy`] holds small deterministic stand-ins used by tests and
//! desk-scale runs. [`conformance`] checks any implementation against the
//! interface contracts.

pub mod conformance;
pub mod external;
pub mod toy;

use std::time::Duration;

use thiserror::Error;

use crate::model::{RngStream, CONTEXT_LEN, WINDOW_LEN};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("model process failed: {0}")]
    Crashed(String),
    #[error("model reported an error: {0}")]
    Remote(String),
}

/// Samples the three sentences preceding `last_sentence`, oldest first.
pub trait ContextGenerator: Send + Sync {
    fn sample_context(
        &self,
        last_sentence: &str,
        rng: &mut RngStream,
    ) -> Result<Vec<String>, ModelError>;
}

/// Translates a short document sentence by sentence.
pub trait Translator: Send + Sync {
    fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError>;
}

/// Log-probability of `tgt_doc` given `src_doc` (higher is more probable).
pub trait Scorer: Send + Sync {
    fn score(&self, src_doc: &[String], tgt_doc: &[String]) -> Result<f64, ModelError>;
}

/// Calls the generator and enforces the three-sentence contract.
pub fn sample_context_checked(
    gen: &dyn ContextGenerator,
    last_sentence: &str,
    rng: &mut RngStream,
) -> Result<Vec<String>, ModelError> {
    let ctx = gen.sample_context(last_sentence, rng)?;
    if ctx.len() != CONTEXT_LEN {
        return Err(ModelError::Contract(format!(
            "generator returned {} sentences, expected {CONTEXT_LEN}",
            ctx.len()
        )));
    }
    Ok(ctx)
}

/// Calls the translator and enforces the length contract (1..=4 in, as many out).
pub fn translate_checked(bt: &dyn Translator, doc: &[String]) -> Result<Vec<String>, ModelError> {
    if doc.is_empty() || doc.len() > WINDOW_LEN {
        return Err(ModelError::Contract(format!(
            "translator input must have 1..={WINDOW_LEN} sentences, got {}",
            doc.len()
        )));
    }
    let out = bt.translate(doc)?;
    if out.len() != doc.len() {
        return Err(ModelError::Contract(format!(
            "translator returned {} sentences for {} inputs",
            out.len(),
            doc.len()
        )));
    }
    Ok(out)
}

impl<T: ContextGenerator + ?Sized> ContextGenerator for Box<T> {
    fn sample_context(&self, last: &str, rng: &mut RngStream) -> Result<Vec<String>, ModelError> {
        (**self).sample_context(last, rng)
    }
}

impl<T: Translator + ?Sized> Translator for Box<T> {
    fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError> {
        (**self).translate(doc)
    }
}

impl<T: Scorer + ?Sized> Scorer for Box<T> {
    fn score(&self, src_doc: &[String], tgt_doc: &[String]) -> Result<f64, ModelError> {
        (**self).score(src_doc, tgt_doc)
    }
}
