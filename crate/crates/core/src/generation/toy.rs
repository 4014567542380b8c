//! In-process stand-ins for the neural models.

use std::collections::HashMap;

use super::{ContextGenerator, ModelError, Scorer, Translator};
use crate::model::RngStream;

/// Looks the last sentence up in a table; unknown sentences are echoed three
/// times with `#1`, `#2`, `#3` suffixes.
#[derive(Debug, Clone, Default)]
pub struct ToyGenerator {
    table: HashMap<String, [String; 3]>,
}

impl ToyGenerator {
    pub fn new(table: HashMap<String, [String; 3]>) -> Self {
        Self { table }
    }

    pub fn echo() -> Self {
        Self::default()
    }
}

impl ContextGenerator for ToyGenerator {
    fn sample_context(&self, last: &str, _rng: &mut RngStream) -> Result<Vec<String>, ModelError> {
        Ok(match self.table.get(last) {
            Some(ctx) => ctx.to_vec(),
            None => (1..=3).map(|i| format!("{last}#{i}")).collect(),
        })
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError> {
        Ok(doc.to_vec())
    }
}

/// Upper-cases every sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct UppercaseTranslator;

impl Translator for UppercaseTranslator {
    fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError> {
        Ok(doc.iter().map(|s| s.to_uppercase()).collect())
    }
}

/// Add-one smoothed unigram model over target-side whitespace tokens.
///
/// Only the last target sentence is scored; context is ignored.
#[derive(Debug, Clone)]
pub struct UnigramScorer {
    counts: HashMap<String, u64>,
    total: u64,
}

impl UnigramScorer {
    /// Counts the tokens of `sentences`. Returns `None` when nothing was counted.
    pub fn from_sentences<'a, I>(sentences: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut total = 0;
        for s in sentences {
            for tok in s.split_whitespace() {
                *counts.entry(tok.to_string()).or_default() += 1;
                total += 1;
            }
        }
        (total > 0).then_some(Self { counts, total })
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    /// `sum(log((count + 1) / (total + V)))` over the tokens of `sentence`.
    pub fn sentence_logprob(&self, sentence: &str) -> f64 {
        let denom = (self.total + self.counts.len() as u64) as f64;
        sentence
            .split_whitespace()
            .map(|t| ((self.count(t) + 1) as f64 / denom).ln())
            .sum()
    }
}

impl Scorer for UnigramScorer {
    fn score(&self, _src_doc: &[String], tgt_doc: &[String]) -> Result<f64, ModelError> {
        let last = tgt_doc
            .last()
            .ok_or_else(|| ModelError::Contract("empty target document".into()))?;
        Ok(self.sentence_logprob(last))
    }
}

/// Gives every input the same score.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _: &[String], _: &[String]) -> Result<f64, ModelError> {
        Ok(self.0)
    }
}
