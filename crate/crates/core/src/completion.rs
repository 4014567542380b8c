//! Filling in missing document context.
//!
//! The copy family interpolates between random context and full copies:
//! with `c` total occurrences of the current pair among the four positions,
//! the three context slots hold `c - 1` copies of the current pair and
//! `4 - c` pairs sampled from the corpus, in random order.
//!
//! | `c` | context                        |
//! |-----|--------------------------------|
//! | 1   | three random pairs             |
//! | 2   | one copy, two random (partial) |
//! | 3   | two copies, one random         |
//! | 4   | three copies (full copy)       |
//!
//! Examples that already have real context are never touched.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generation::{sample_context_checked, translate_checked, ContextGenerator, Translator};
use crate::model::{
    derive_rng, ContextualExample, Provenance, ReservedTokens, RngStream, SentencePair, CONTEXT_LEN,
};
use crate::par;

/// Re-draws allowed when a pool sample equals the current pair.
pub const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionStrategy {
    None,
    CopyFamily(u8),
    Generated,
}

impl FromStr for CompletionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "generated" => Ok(Self::Generated),
            _ => {
                let c = s
                    .strip_prefix("copy:")
                    .and_then(|c| c.parse::<u8>().ok())
                    .filter(|c| (1..=4).contains(c))
                    .ok_or_else(|| {
                        Error::InvalidStrategy(format!(
                            "{s:?} (expected none, copy:1..4 or generated)"
                        ))
                    })?;
                Ok(Self::CopyFamily(c))
            }
        }
    }
}

impl fmt::Display for CompletionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::CopyFamily(c) => write!(f, "copy:{c}"),
            Self::Generated => f.write_str("generated"),
        }
    }
}

/// Sentence pairs random context is sampled from, uniformly with replacement.
#[derive(Debug, Clone, Default)]
pub struct RandomPool {
    pairs: Vec<SentencePair>,
}

impl RandomPool {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        Self { pairs }
    }

    /// Pool of the current pairs of `examples`.
    pub fn from_examples(examples: &[ContextualExample]) -> Self {
        Self::new(examples.iter().map(|e| e.current().clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Draws a pair different from `avoid`.
    fn sample_distinct(&self, avoid: &SentencePair, rng: &mut RngStream) -> Result<SentencePair> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyPool);
        }
        for _ in 0..=MAX_REDRAWS {
            let pick = &self.pairs[rng.gen_range(0..self.pairs.len())];
            if pick != avoid {
                return Ok(pick.clone());
            }
        }
        Err(Error::PoolExhausted(MAX_REDRAWS))
    }
}

fn require_missing(ex: &ContextualExample) -> Result<()> {
    if ex.is_missing() {
        Ok(())
    } else {
        Err(Error::InvalidExample(format!(
            "{}: context is already present ({:?})",
            ex.id(),
            ex.provenance()
        )))
    }
}

/// Completes `ex` with `c - 1` copies of its current pair and `4 - c` pool
/// samples, shuffled over the three context slots.
pub fn complete_copy_family(
    ex: &ContextualExample,
    c: u8,
    pool: &RandomPool,
    rng: &mut RngStream,
) -> Result<ContextualExample> {
    if !(1..=4).contains(&c) {
        return Err(Error::InvalidStrategy(format!("copy count {c} not in 1..=4")));
    }
    require_missing(ex)?;
    let copies = usize::from(c) - 1;
    let current = ex.current();

    let mut slots: Vec<(SentencePair, Provenance)> = Vec::with_capacity(CONTEXT_LEN);
    slots.extend(std::iter::repeat_n((current.clone(), Provenance::Copy), copies));
    for _ in copies..CONTEXT_LEN {
        slots.push((pool.sample_distinct(current, rng)?, Provenance::Random));
    }
    slots.shuffle(rng);

    let (pairs, prov): (Vec<_>, Vec<_>) = slots.into_iter().unzip();
    ex.completed(
        pairs.try_into().expect("three slots"),
        prov.try_into().expect("three slots"),
    )
}

/// Completes `ex` with a sampled target context and its back-translation.
///
/// The translator sees the four-sentence target document; its fourth output
/// is discarded and the original source stays as the current source.
pub fn complete_generated(
    ex: &ContextualExample,
    generator: &dyn ContextGenerator,
    translator: &dyn Translator,
    rng: &mut RngStream,
    tokens: &ReservedTokens,
) -> Result<ContextualExample> {
    require_missing(ex)?;
    let current = ex.current();
    let tgt_ctx = sample_context_checked(generator, current.tgt(), rng)?;
    let mut doc = tgt_ctx.clone();
    doc.push(current.tgt().to_string());
    let translated = translate_checked(translator, &doc)?;

    let pairs = translated
        .into_iter()
        .take(CONTEXT_LEN)
        .zip(tgt_ctx)
        .map(|(s, t)| SentencePair::new(s, t, tokens))
        .collect::<Result<Vec<_>>>()?;
    ex.completed(
        pairs.try_into().expect("three pairs"),
        [Provenance::Generated; CONTEXT_LEN],
    )
}

/// A strategy bound to the resources it needs.
#[derive(Clone, Copy)]
pub enum Completer<'a> {
    None,
    Copy {
        copies: u8,
        pool: &'a RandomPool,
    },
    Generated {
        generator: &'a dyn ContextGenerator,
        translator: &'a dyn Translator,
    },
}

impl Completer<'_> {
    pub fn strategy(&self) -> CompletionStrategy {
        match self {
            Completer::None => CompletionStrategy::None,
            Completer::Copy { copies, .. } => CompletionStrategy::CopyFamily(*copies),
            Completer::Generated { .. } => CompletionStrategy::Generated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletionFailure {
    pub index: usize,
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CompletionStats {
    pub examples_in: usize,
    pub examples_out: usize,
    pub real: usize,
    pub completed: usize,
    pub left_missing: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct CompletionOutcome {
    pub examples: Vec<ContextualExample>,
    pub stats: CompletionStats,
    pub failures: Vec<CompletionFailure>,
}

/// Stream key of the example at `index` (0-based) in corpus `corpus`.
pub fn example_key(corpus: &str, index: usize) -> String {
    format!("{corpus}:{}", index + 1)
}

/// Applies `completer` to every example with missing context.
///
/// Output order equals input order and any example that is not missing, or
/// whose completion fails, is passed through unchanged. Each example draws
/// from `derive_rng(seed, example_key(corpus, index))`.
pub fn complete_dataset(
    examples: &[ContextualExample],
    completer: &Completer<'_>,
    seed: u64,
    corpus: &str,
    tokens: &ReservedTokens,
) -> CompletionOutcome {
    let results = par::map_indexed(examples, |i, ex| {
        if !ex.is_missing() {
            return Ok(None);
        }
        let mut rng = derive_rng(seed, &example_key(corpus, i));
        match completer {
            Completer::None => Ok(None),
            Completer::Copy { copies, pool } => {
                complete_copy_family(ex, *copies, pool, &mut rng).map(Some)
            }
            Completer::Generated {
                generator,
                translator,
            } => complete_generated(ex, *generator, *translator, &mut rng, tokens).map(Some),
        }
    });

    let mut stats = CompletionStats {
        examples_in: examples.len(),
        examples_out: examples.len(),
        ..Default::default()
    };
    let mut failures = Vec::new();
    let mut out = Vec::with_capacity(examples.len());
    for (i, (ex, res)) in examples.iter().zip(results).enumerate() {
        match res {
            Ok(Some(done)) => {
                stats.completed += 1;
                out.push(done);
            }
            Ok(None) => {
                if ex.is_real() {
                    stats.real += 1;
                } else if ex.is_missing() {
                    stats.left_missing += 1;
                }
                out.push(ex.clone());
            }
            Err(e) => {
                log::warn!("example {} ({}) left unmodified: {e}", i + 1, ex.id());
                stats.failed += 1;
                stats.left_missing += 1;
                failures.push(CompletionFailure {
                    index: i,
                    id: ex.id().to_string(),
                    error: e.to_string(),
                });
                out.push(ex.clone());
            }
        }
    }
    CompletionOutcome {
        examples: out,
        stats,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::toy::{IdentityTranslator, ToyGenerator, UppercaseTranslator};
    use crate::generation::ModelError;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::HashMap;

    fn tok() -> ReservedTokens {
        ReservedTokens::default()
    }

    fn pair(s: &str) -> SentencePair {
        SentencePair::new(s, s.to_uppercase(), &tok()).unwrap()
    }

    fn pool(n: usize) -> RandomPool {
        RandomPool::new((0..n).map(|i| pair(&format!("pool {i}"))).collect())
    }

    fn copies_of(ex: &ContextualExample) -> usize {
        ex.context()
            .unwrap()
            .iter()
            .filter(|p| *p == ex.current())
            .count()
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("copy:2".parse::<CompletionStrategy>().unwrap(), CompletionStrategy::CopyFamily(2));
        assert_eq!("none".parse::<CompletionStrategy>().unwrap(), CompletionStrategy::None);
        assert_eq!("generated".parse::<CompletionStrategy>().unwrap(), CompletionStrategy::Generated);
        for bad in ["copy:0", "copy:5", "copy", "random"] {
            assert!(bad.parse::<CompletionStrategy>().is_err(), "{bad}");
        }
        assert_eq!(CompletionStrategy::CopyFamily(3).to_string(), "copy:3");
    }

    #[test]
    fn partial_copy_has_one_copy() {
        let ex = ContextualExample::missing("e", pair("she got mad at everything."));
        let out = complete_copy_family(&ex, 2, &pool(50), &mut derive_rng(1, "k")).unwrap();
        assert_eq!(out.current(), ex.current());
        assert_eq!(copies_of(&out), 1);
        let prov = out.provenance();
        assert_eq!(prov.iter().filter(|p| **p == Provenance::Copy).count(), 1);
        assert_eq!(prov.iter().filter(|p| **p == Provenance::Random).count(), 2);
        for (p, slot) in prov.iter().zip(out.context().unwrap()) {
            assert_eq!(*p == Provenance::Copy, slot == ex.current());
        }
    }

    #[test]
    fn full_copy_needs_no_pool() {
        let ex = ContextualExample::missing("e", pair("x"));
        let out = complete_copy_family(&ex, 4, &RandomPool::default(), &mut derive_rng(1, "k")).unwrap();
        assert!(out.context().unwrap().iter().all(|p| p == ex.current()));
        assert_eq!(out.provenance(), [Provenance::Copy; 3]);
    }

    #[test]
    fn random_context_redraws_self() {
        let current = pair("me");
        let mut pairs = vec![current.clone(); 5];
        pairs.push(pair("other"));
        let pool = RandomPool::new(pairs);
        let ex = ContextualExample::missing("e", current);
        for k in 0..50 {
            match complete_copy_family(&ex, 1, &pool, &mut derive_rng(3, &k.to_string())) {
                Ok(out) => {
                    assert_eq!(copies_of(&out), 0);
                    assert_eq!(out.provenance(), [Provenance::Random; 3]);
                }
                // (5/6)^17 per slot: rare but legal
                Err(Error::PoolExhausted(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn pathological_pool_errors() {
        let current = pair("me");
        let pool = RandomPool::new(vec![current.clone(); 3]);
        let ex = ContextualExample::missing("e", current);
        let err = complete_copy_family(&ex, 2, &pool, &mut derive_rng(0, "k")).unwrap_err();
        assert!(matches!(err, Error::PoolExhausted(16)));
        assert!(complete_copy_family(&ex, 4, &pool, &mut derive_rng(0, "k")).is_ok());
        let err = complete_copy_family(&ex, 3, &RandomPool::default(), &mut derive_rng(0, "k"));
        assert!(matches!(err, Err(Error::EmptyPool)));
        assert!(matches!(
            complete_copy_family(&ex, 0, &pool, &mut derive_rng(0, "k")),
            Err(Error::InvalidStrategy(_))
        ));
    }

    #[test]
    fn real_examples_are_rejected() {
        let ex = ContextualExample::real("r", [pair("a"), pair("b"), pair("c")], pair("d"));
        assert!(complete_copy_family(&ex, 2, &pool(3), &mut derive_rng(0, "k")).is_err());
    }

    fn table_generator() -> ToyGenerator {
        let mut table = HashMap::new();
        table.insert("Y".to_string(), ["a".to_string(), "b".into(), "c".into()]);
        ToyGenerator::new(table)
    }

    #[test]
    fn generated_context_uses_back_translation() {
        let ex = ContextualExample::missing("g", SentencePair::new("y", "Y", &tok()).unwrap());
        let out = complete_generated(&ex, &table_generator(), &UppercaseTranslator, &mut derive_rng(0, "k"), &tok())
            .unwrap();
        let ctx = out.context().unwrap();
        assert_eq!(ctx.iter().map(|p| p.tgt()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(ctx.iter().map(|p| p.src()).collect::<Vec<_>>(), ["A", "B", "C"]);
        assert_eq!(out.current(), ex.current());
        assert_eq!(out.provenance(), [Provenance::Generated; 3]);
    }

    struct TwoSentences;
    impl ContextGenerator for TwoSentences {
        fn sample_context(&self, _: &str, _: &mut RngStream) -> Result<Vec<String>, ModelError> {
            Ok(vec!["a".into(), "b".into()])
        }
    }

    /// Samples from a small vocabulary with the supplied stream.
    struct SamplingGenerator;
    impl ContextGenerator for SamplingGenerator {
        fn sample_context(&self, last: &str, rng: &mut RngStream) -> Result<Vec<String>, ModelError> {
            Ok((0..3).map(|_| format!("{last} {}", rng.gen_range(0..1000))).collect())
        }
    }

    #[test]
    fn generator_contract_violation_keeps_example() {
        let ex = ContextualExample::missing("g", pair("y"));
        let err = complete_generated(&ex, &TwoSentences, &IdentityTranslator, &mut derive_rng(0, "k"), &tok());
        assert!(matches!(err, Err(Error::Model(ModelError::Contract(_)))));

        let completer = Completer::Generated { generator: &TwoSentences, translator: &IdentityTranslator };
        let out = complete_dataset(std::slice::from_ref(&ex), &completer, 0, "c", &tok());
        assert_eq!(out.examples, vec![ex]);
        assert_eq!(out.stats.failed, 1);
        assert_eq!(out.failures[0].id, "g");
    }

    #[test]
    fn generated_is_deterministic_per_stream() {
        let ex = ContextualExample::missing("g", pair("y"));
        let run = |seed| {
            complete_generated(&ex, &SamplingGenerator, &IdentityTranslator, &mut derive_rng(seed, "k"), &tok())
                .unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    fn corpus(real: usize, missing: usize) -> Vec<ContextualExample> {
        let mut v: Vec<ContextualExample> = (0..real)
            .map(|i| {
                ContextualExample::real(
                    format!("r{i}"),
                    [pair(&format!("r{i} a")), pair(&format!("r{i} b")), pair(&format!("r{i} c"))],
                    pair(&format!("r{i} d")),
                )
            })
            .collect();
        v.extend((0..missing).map(|i| ContextualExample::missing(format!("m{i}"), pair(&format!("m{i}")))));
        v
    }

    #[test]
    fn dataset_routing() {
        let exs = corpus(2, 4);
        let pool = RandomPool::from_examples(&exs);
        let out = complete_dataset(&exs, &Completer::Copy { copies: 2, pool: &pool }, 9, "c", &tok());
        assert_eq!(out.examples[..2], exs[..2]);
        assert!(out.examples[2..].iter().all(|e| !e.is_missing() && copies_of(e) == 1));
        assert_eq!((out.stats.real, out.stats.completed, out.stats.failed), (2, 4, 0));
        assert!(out.examples.iter().zip(&exs).all(|(a, b)| a.id() == b.id()));

        let none = complete_dataset(&exs, &Completer::None, 9, "c", &tok());
        assert_eq!(none.examples, exs);
        assert_eq!(none.stats.left_missing, 4);
    }

    #[test]
    fn quarter_real_corpus_fully_completed() {
        let exs = corpus(25, 75);
        let pool = RandomPool::from_examples(&exs);
        for c in 1..=4 {
            let out = complete_dataset(&exs, &Completer::Copy { copies: c, pool: &pool }, 1, "c", &tok());
            assert!(out.examples.iter().all(|e| e.context().is_some()));
        }
    }

    #[test]
    fn copy_position_is_uniform() {
        let exs = corpus(0, 10_000);
        let pool = RandomPool::from_examples(&exs);
        let out = complete_dataset(&exs, &Completer::Copy { copies: 2, pool: &pool }, 2024, "u", &tok());
        let mut counts = [0f64; 3];
        for ex in &out.examples {
            let pos = ex.provenance().iter().position(|p| *p == Provenance::Copy).unwrap();
            counts[pos] += 1.0;
        }
        let n = out.examples.len() as f64;
        let expected = n / 3.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // chi-square, 2 dof: p = exp(-x/2) > 0.001  <=>  x < 13.8155
        assert!(chi2 < 13.8155, "chi2 {chi2} counts {counts:?}");
        for c in counts {
            assert!((c / n - 1.0 / 3.0).abs() <= 0.02, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn current_kept_and_copy_count_exact(c in 1u8..=4, seed in any::<u64>(), n in 2usize..30) {
            let exs = corpus(1, n);
            let pool = RandomPool::from_examples(&exs);
            let out = complete_dataset(&exs, &Completer::Copy { copies: c, pool: &pool }, seed, "p", &tok());
            prop_assert_eq!(out.stats.failed, 0);
            prop_assert_eq!(&out.examples[0], &exs[0]);
            for (a, b) in out.examples.iter().zip(&exs).skip(1) {
                prop_assert_eq!(a.current(), b.current());
                prop_assert_eq!(copies_of(a), usize::from(c) - 1);
            }
        }
    }
}
