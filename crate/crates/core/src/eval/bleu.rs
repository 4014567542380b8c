//! Corpus BLEU compatible with mteval-v13a (international tokenization).

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;

pub const MAX_ORDER: usize = 4;

/// Code points with the Unicode `Hyphen` property.
const HYPHENS: &str = "\u{2d}\u{ad}\u{58a}\u{1806}\u{2010}\u{2011}\u{2e17}\u{30fb}\u{fe63}\u{ff0d}\u{ff65}";

struct Rules {
    eol_hyphen: Regex,
    punct_after: Regex,
    punct_before: Regex,
    symbol: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        eol_hyphen: Regex::new(&format!("[{}]\u{2028}", regex::escape(HYPHENS))).expect("regex"),
        punct_after: Regex::new(r"(\P{N})(\p{P})").expect("regex"),
        punct_before: Regex::new(r"(\p{P})(\P{N})").expect("regex"),
        symbol: Regex::new(r"(\p{S})").expect("regex"),
    })
}

/// mteval-v13a international tokenization.
///
/// Punctuation is split off unless it sits between two digits, symbols are
/// always split off, and whitespace is collapsed. Case is kept unless
/// `lowercase` is set.
pub fn tokenize_v13a(text: &str, lowercase: bool) -> Vec<String> {
    let r = rules();
    let mut s = text.replace("<skipped>", "");
    s = r.eol_hyphen.replace_all(&s, "").into_owned();
    s = s.replace('\u{2028}', " ");
    s = s
        .replace("&quot;", "\"")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&apos;", "'");
    if lowercase {
        s = s.to_lowercase();
    }
    s = r.punct_after.replace_all(&s, "$1 $2 ").into_owned();
    s = r.punct_before.replace_all(&s, " $1 $2").into_owned();
    s = r.symbol.replace_all(&s, " $1 ").into_owned();
    s.split_whitespace().map(str::to_string).collect()
}

/// Sufficient statistics; adding two of them is the corpus-level reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl std::ops::Add for BleuStats {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
        self
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_default() += 1;
    }
    counts
}

impl BleuStats {
    /// Clipped n-gram matches of one tokenized segment.
    pub fn segment(hyp: &[String], reference: &[String]) -> Self {
        let mut s = Self {
            hyp_len: hyp.len() as u64,
            ref_len: reference.len() as u64,
            ..Self::default()
        };
        for n in 1..=MAX_ORDER {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(reference, n);
            s.totals[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
            s.matches[n - 1] = h
                .iter()
                .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
                .sum();
        }
        s
    }

    pub fn report(&self) -> BleuReport {
        let precisions: [f64; MAX_ORDER] = std::array::from_fn(|n| {
            if self.totals[n] > 0 {
                self.matches[n] as f64 / self.totals[n] as f64
            } else {
                0.0
            }
        });
        let brevity_penalty = if self.hyp_len == 0 {
            if self.ref_len == 0 {
                1.0
            } else {
                0.0
            }
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let bleu = if precisions.iter().all(|p| *p > 0.0) {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
            100.0 * brevity_penalty * log_mean.exp()
        } else {
            0.0
        };
        BleuReport {
            bleu,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl std::fmt::Display for BleuReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p: Vec<String> = self.precisions.iter().map(|p| format!("{:.1}", p * 100.0)).collect();
        write!(
            f,
            "BLEU = {:.2}, {} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu,
            p.join("/"),
            self.brevity_penalty,
            if self.ref_len == 0 { 0.0 } else { self.hyp_len as f64 / self.ref_len as f64 },
            self.hyp_len,
            self.ref_len
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuOptions {
    pub lowercase: bool,
}

/// Case-sensitive corpus BLEU with one reference per segment.
pub fn bleu<S: AsRef<str> + Sync>(hypotheses: &[S], references: &[S]) -> Result<BleuReport> {
    bleu_with(hypotheses, references, BleuOptions::default())
}

pub fn bleu_with<S: AsRef<str> + Sync>(
    hypotheses: &[S],
    references: &[S],
    opts: BleuOptions,
) -> Result<BleuReport> {
    if hypotheses.len() != references.len() || hypotheses.is_empty() {
        return Err(Error::LengthMismatch {
            hyps: hypotheses.len(),
            refs: references.len(),
        });
    }
    let idx: Vec<usize> = (0..hypotheses.len()).collect();
    let stats = par::map_reduce(
        &idx,
        |&i| {
            BleuStats::segment(
                &tokenize_v13a(hypotheses[i].as_ref(), opts.lowercase),
                &tokenize_v13a(references[i].as_ref(), opts.lowercase),
            )
        },
        BleuStats::default,
        |a, b| a + b,
    );
    Ok(stats.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_v13a(s, false)
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(toks("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(toks("3.5"), ["3.5"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("1,000 people."), ["1,000", "people", "."]);
        assert_eq!(toks("a.b"), ["a", ".", "b"]);
        assert_eq!(toks("$5 + 3"), ["$", "5", "+", "3"]);
        assert_eq!(toks("Привет, мир!"), ["Привет", ",", "мир", "!"]);
        assert_eq!(toks("«Да» — сказал"), ["«", "Да", "»", "—", "сказал"]);
        assert_eq!(toks("a &amp; b&quot;"), ["a", "&", "b", "\""]);
        assert_eq!(toks("  x \t y  "), ["x", "y"]);
        assert_eq!(toks("Hello"), ["Hello"]);
        assert_eq!(tokenize_v13a("Hello", true), ["hello"]);
        assert_eq!(toks("co-\u{2028}operate"), ["cooperate"]);
    }

    #[test]
    fn identity_is_100() {
        let r = bleu(&["the cat sat on the mat"], &["the cat sat on the mat"]).unwrap();
        assert_eq!(r.bleu, 100.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn clipped_unigrams() {
        let r = bleu(&["the the the"], &["the cat sat"]).unwrap();
        assert!((r.precisions[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.precisions[1], 0.0);
        assert_eq!(r.bleu, 0.0);
    }

    #[test]
    fn short_hypothesis_penalty() {
        let r = bleu(&["the cat"], &["the cat sat on the mat"]).unwrap();
        assert!((r.brevity_penalty - (1.0f64 - 3.0).exp()).abs() < 1e-15);
        // no 3- or 4-grams in a 2-token hypothesis
        assert_eq!(r.bleu, 0.0);
    }

    #[test]
    fn errors_and_degenerate_inputs() {
        assert!(bleu(&["a"], &["a", "b"]).is_err());
        assert!(bleu::<&str>(&[], &[]).is_err());
        let r = bleu(&[""], &["a b c d"]).unwrap();
        assert_eq!((r.bleu, r.brevity_penalty), (0.0, 0.0));
    }

    #[test]
    fn stats_add_is_associative() {
        let a = BleuStats::segment(&toks("a b c d e"), &toks("a b c d f"));
        let b = BleuStats::segment(&toks("x y"), &toks("x y z"));
        let c = BleuStats::segment(&toks("q"), &toks("r"));
        assert_eq!((a + b) + c, a + (b + c));
    }
}
