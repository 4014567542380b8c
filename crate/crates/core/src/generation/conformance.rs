//! Contract checks runnable against any model implementation.
//!
//! Each check returns the list of violations it found (empty = conforming),
//! so that in-process toys and subprocess models can share one suite.

use super::{sample_context_checked, translate_checked, ContextGenerator, Scorer, Translator};
use crate::model::derive_rng;

const PROBES: [&str; 4] = ["Hello.", "Она постоянно выходила из себя.", "a b c", "?"];

pub fn check_generator(gen: &dyn ContextGenerator) -> Vec<String> {
    let mut problems = Vec::new();
    for (i, last) in PROBES.iter().enumerate() {
        let key = format!("conformance-{i}");
        let first = sample_context_checked(gen, last, &mut derive_rng(7, &key));
        let second = sample_context_checked(gen, last, &mut derive_rng(7, &key));
        match (first, second) {
            (Ok(a), Ok(b)) => {
                if a.iter().any(|s| s.trim().is_empty()) {
                    problems.push(format!("{last:?}: empty context sentence in {a:?}"));
                }
                if a != b {
                    problems.push(format!("{last:?}: same stream gave {a:?} then {b:?}"));
                }
            }
            (Err(e), _) | (_, Err(e)) => problems.push(format!("{last:?}: {e}")),
        }
    }
    problems
}

pub fn check_translator(bt: &dyn Translator) -> Vec<String> {
    let mut problems = Vec::new();
    for n in 1..=PROBES.len() {
        let doc: Vec<String> = PROBES[..n].iter().map(|s| s.to_string()).collect();
        if let Err(e) = translate_checked(bt, &doc) {
            problems.push(format!("{n}-sentence document: {e}"));
        }
    }
    problems
}

pub fn check_scorer(scorer: &dyn Scorer) -> Vec<String> {
    let mut problems = Vec::new();
    let src: Vec<String> = PROBES.iter().map(|s| s.to_string()).collect();
    let tgts = [
        src.clone(),
        vec!["x".into(), "y".into(), "z".into(), "w".into()],
    ];
    for tgt in &tgts {
        match (scorer.score(&src, tgt), scorer.score(&src, tgt)) {
            (Ok(a), Ok(b)) => {
                if a.is_nan() {
                    problems.push(format!("{tgt:?}: NaN score"));
                } else if a.to_bits() != b.to_bits() {
                    problems.push(format!("{tgt:?}: scores {a} then {b}"));
                }
            }
            (Err(e), _) | (_, Err(e)) => problems.push(format!("{tgt:?}: {e}")),
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::toy::*;
    use crate::generation::ModelError;
    use crate::model::RngStream;

    #[test]
    fn toys_conform() {
        assert!(check_generator(&ToyGenerator::echo()).is_empty());
        assert!(check_translator(&IdentityTranslator).is_empty());
        assert!(check_translator(&UppercaseTranslator).is_empty());
        let s = UnigramScorer::from_sentences(["x y z"]).unwrap();
        assert!(check_scorer(&s).is_empty());
        assert!(check_scorer(&ConstantScorer(-1.0)).is_empty());
    }

    struct TwoSentences;
    impl ContextGenerator for TwoSentences {
        fn sample_context(&self, _: &str, _: &mut RngStream) -> Result<Vec<String>, ModelError> {
            Ok(vec!["a".into(), "b".into()])
        }
    }

    struct DropsOne;
    impl Translator for DropsOne {
        fn translate(&self, doc: &[String]) -> Result<Vec<String>, ModelError> {
            Ok(doc[1..].to_vec())
        }
    }

    #[test]
    fn violations_reported() {
        assert_eq!(check_generator(&TwoSentences).len(), PROBES.len());
        assert_eq!(check_translator(&DropsOne).len(), PROBES.len());
        assert_eq!(check_scorer(&ConstantScorer(f64::NAN)).len(), 2);
    }
}
