//! Tagged back-translation of monolingual windows and corpus mixing.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generation::{translate_checked, ModelError, Translator};
use crate::model::{
    ContextualExample, MonoWindow, ReservedTokens, RngStream, SentencePair, CONTEXT_LEN, WINDOW_LEN,
};
use crate::par;

pub const DEFAULT_MAX_TOKENS: usize = 512;

/// Which part of a back-translated window enters the training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BtMode {
    /// All four pairs: three context pairs and the current pair.
    #[default]
    Context,
    /// Only the last pair, without context (sentence-level baseline).
    LastSentenceOnly,
}

impl FromStr for BtMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "context" => Ok(Self::Context),
            "last" | "last_sentence_only" => Ok(Self::LastSentenceOnly),
            _ => Err(Error::Config(format!("unknown back-translation mode {s:?}"))),
        }
    }
}

impl fmt::Display for BtMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Context => "context",
            Self::LastSentenceOnly => "last",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BtConfig {
    pub tokens: ReservedTokens,
    pub mode: BtMode,
    /// Longest allowed concatenated side, in whitespace tokens.
    pub max_tokens: usize,
}

impl Default for BtConfig {
    fn default() -> Self {
        Self {
            tokens: ReservedTokens::default(),
            mode: BtMode::Context,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Why a window produced no example.
#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    TooLong { side: &'static str, tokens: usize },
    Translator(ModelError),
    Invalid(String),
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooLong { side, tokens } => write!(f, "{side} side has {tokens} tokens"),
            Self::Translator(e) => write!(f, "translator: {e}"),
            Self::Invalid(m) => write!(f, "invalid: {m}"),
        }
    }
}

/// Whitespace tokens of the separator-joined document, with a tag token per
/// sentence when `tagged`.
fn joined_len(sentences: &[String], tagged: bool) -> usize {
    let words: usize = sentences.iter().map(|s| s.split_whitespace().count()).sum();
    let tags = if tagged { sentences.len() } else { 0 };
    words + sentences.len().saturating_sub(1) + tags
}

/// Turns a window into a tagged synthetic example.
///
/// The translator runs target-to-source over all four sentences; the targets
/// stay exactly as in the window.
pub fn backtranslate_window(
    w: &MonoWindow,
    bt: &dyn Translator,
    cfg: &BtConfig,
) -> std::result::Result<ContextualExample, SkipReason> {
    let tgt = w.sentences();
    if tgt.len() != WINDOW_LEN {
        return Err(SkipReason::Invalid(format!(
            "window has {} sentences, expected {WINDOW_LEN}",
            tgt.len()
        )));
    }
    let tgt_len = joined_len(tgt, false);
    if tgt_len > cfg.max_tokens {
        return Err(SkipReason::TooLong {
            side: "target",
            tokens: tgt_len,
        });
    }
    let src = translate_checked(bt, tgt).map_err(SkipReason::Translator)?;
    let src_len = joined_len(&src, true);
    if src_len > cfg.max_tokens {
        return Err(SkipReason::TooLong {
            side: "source",
            tokens: src_len,
        });
    }

    let pairs = src
        .into_iter()
        .zip(tgt)
        .map(|(s, t)| SentencePair::new(s, t.as_str(), &cfg.tokens))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| SkipReason::Invalid(e.to_string()))?;
    let id = format!("bt:{}:{}", w.origin_id(), w.start_index());
    let mut pairs = pairs.into_iter();
    let context: [SentencePair; CONTEXT_LEN] = [
        pairs.next().expect("4 pairs"),
        pairs.next().expect("4 pairs"),
        pairs.next().expect("4 pairs"),
    ];
    let current = pairs.next().expect("4 pairs");
    let ex = match cfg.mode {
        BtMode::Context => ContextualExample::real(id, context, current),
        BtMode::LastSentenceOnly => ContextualExample::missing(id, current),
    };
    Ok(ex.with_tagged(true))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BtStats {
    pub windows: usize,
    pub emitted: usize,
    pub skipped_length: usize,
    pub skipped_translator: usize,
    pub skipped_invalid: usize,
}

/// Back-translates every window, in order, counting the skips.
pub fn backtranslate_windows(
    windows: &[MonoWindow],
    bt: &dyn Translator,
    cfg: &BtConfig,
) -> (Vec<ContextualExample>, BtStats) {
    let results = par::map_indexed(windows, |_, w| backtranslate_window(w, bt, cfg));
    let mut stats = BtStats {
        windows: windows.len(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(windows.len());
    for (w, r) in windows.iter().zip(results) {
        match r {
            Ok(ex) => out.push(ex),
            Err(reason) => {
                log::debug!("skipping window {}@{}: {reason}", w.origin_id(), w.start_index());
                match reason {
                    SkipReason::TooLong { .. } => stats.skipped_length += 1,
                    SkipReason::Translator(_) => stats.skipped_translator += 1,
                    SkipReason::Invalid(_) => stats.skipped_invalid += 1,
                }
            }
        }
    }
    stats.emitted = out.len();
    (out, stats)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MixStats {
    pub bilingual_in: usize,
    pub synthetic_in: usize,
    pub bilingual_out: usize,
    pub synthetic_out: usize,
}

/// Mixes bilingual and synthetic examples at `ratio` synthetic per bilingual.
///
/// The over-represented side is down-sampled without replacement (to
/// `round(ratio * B)` synthetic or `round(S / ratio)` bilingual examples) and
/// the union is shuffled with `rng`.
pub fn mix_corpora(
    bilingual: &[ContextualExample],
    synthetic: &[ContextualExample],
    ratio: f64,
    rng: &mut RngStream,
) -> Result<(Vec<ContextualExample>, MixStats)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Config(format!("mix ratio must be positive, got {ratio}")));
    }
    if bilingual.is_empty() || synthetic.is_empty() {
        return Err(Error::Config(format!(
            "mixing needs both corpora (bilingual {}, synthetic {})",
            bilingual.len(),
            synthetic.len()
        )));
    }
    let (b, s) = (bilingual.len(), synthetic.len());
    let want_s = (ratio * b as f64).round() as usize;
    let (keep_b, keep_s) = if s >= want_s {
        (b, want_s)
    } else {
        (((s as f64 / ratio).round() as usize).min(b), s)
    };

    let chosen = |pool: &[ContextualExample], k: usize, rng: &mut RngStream| {
        if k == pool.len() {
            return pool.to_vec();
        }
        let mut idx = index::sample(rng, pool.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect::<Vec<_>>()
    };
    let mut out = chosen(bilingual, keep_b, rng);
    out.extend(chosen(synthetic, keep_s, rng));
    out.shuffle(rng);

    let stats = MixStats {
        bilingual_in: b,
        synthetic_in: s,
        bilingual_out: keep_b,
        synthetic_out: keep_s,
    };
    Ok((out, stats))
}
