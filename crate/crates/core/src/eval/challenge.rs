//! Contrastive challenge-set accuracy.
//!
//! An item counts as correct only when the correct candidate scores strictly
//! higher than every distractor; ties and scorer failures count as wrong.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generation::Scorer;
use crate::model::ChallengeItem;
use crate::par;

/// The four sets averaged into the aggregate score.
pub const CHALLENGE_SETS: [&str; 4] = ["deixis", "lex_cohesion", "ellipsis_infl", "ellipsis_vp"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChallengeOptions {
    /// Divide each score by the candidate's whitespace token count (min 1).
    pub length_norm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetResult {
    pub accuracy: f64,
    pub n: usize,
    pub correct: usize,
    /// Items where the scorer failed on some candidate.
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeReport {
    pub per_set: BTreeMap<String, SetResult>,
    /// Unweighted mean of the per-set accuracies.
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct ItemOutcome {
    correct: bool,
    flagged: bool,
}

fn score_item(item: &ChallengeItem, scorer: &dyn Scorer, opts: ChallengeOptions) -> ItemOutcome {
    let src_doc = item.src_doc();
    let mut scores = Vec::with_capacity(item.candidates().len());
    for (i, cand) in item.candidates().iter().enumerate() {
        match scorer.score(&src_doc, &item.tgt_doc(i)) {
            Ok(s) if !s.is_nan() => {
                let norm = if opts.length_norm {
                    cand.split_whitespace().count().max(1) as f64
                } else {
                    1.0
                };
                scores.push(s / norm);
            }
            Ok(_) => {
                log::warn!("{}: scorer returned NaN for candidate {i}", item.group_id());
                return ItemOutcome { correct: false, flagged: true };
            }
            Err(e) => {
                log::warn!("{}: scorer failed on candidate {i}: {e}", item.group_id());
                return ItemOutcome { correct: false, flagged: true };
            }
        }
    }
    let best = scores[item.correct_index()];
    let correct = scores
        .iter()
        .enumerate()
        .all(|(i, s)| i == item.correct_index() || best > *s);
    ItemOutcome { correct, flagged: false }
}

fn expected_sizes(set: &str) -> Option<&'static [usize]> {
    match set {
        "deixis" => Some(&[500, 2500]),
        "lex_cohesion" => Some(&[500, 1500]),
        _ => None,
    }
}

/// Scores every item and groups accuracies by set name.
pub fn score_challenge(
    items: &[ChallengeItem],
    scorer: &dyn Scorer,
    opts: ChallengeOptions,
) -> ChallengeReport {
    let outcomes = par::map_indexed(items, |_, item| score_item(item, scorer, opts));
    let mut tally: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (item, o) in items.iter().zip(&outcomes) {
        let t = tally.entry(item.set().to_string()).or_default();
        t.0 += 1;
        t.1 += usize::from(o.correct);
        t.2 += usize::from(o.flagged);
    }
    let per_set: BTreeMap<String, SetResult> = tally
        .into_iter()
        .map(|(set, (n, correct, flagged))| {
            if let Some(sizes) = expected_sizes(&set) {
                if !sizes.contains(&n) {
                    log::warn!("challenge set {set:?} has {n} items; expected one of {sizes:?}");
                }
            }
            let res = SetResult {
                accuracy: correct as f64 / n as f64,
                n,
                correct,
                flagged,
            };
            (set, res)
        })
        .collect();
    let aggregate = aggregate(per_set.values().map(|r| r.accuracy));
    ChallengeReport { per_set, aggregate }
}

/// Arithmetic mean (0 for no values).
pub fn aggregate(accuracies: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = accuracies
        .into_iter()
        .fold((0.0, 0usize), |(s, n), a| (s + a, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean of the deixis, lexical cohesion and both ellipsis accuracies; every
/// one of the four must be present.
pub fn aggregate_challenge(report: &ChallengeReport) -> Result<f64> {
    let accs = CHALLENGE_SETS
        .iter()
        .map(|s| {
            report
                .per_set
                .get(*s)
                .map(|r| r.accuracy)
                .ok_or_else(|| Error::MissingSet(s.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(accs))
}

impl ChallengeReport {
    /// Fixed-width table, one row per set plus the aggregate.
    pub fn render_table(&self) -> String {
        let width = self
            .per_set
            .keys()
            .map(String::len)
            .chain(std::iter::once("aggregate".len()))
            .max()
            .unwrap_or(0);
        let mut out = format!("{:<width$}  {:>8}  {:>6}  {:>7}\n", "set", "accuracy", "n", "flagged");
        for (set, r) in &self.per_set {
            out += &format!(
                "{set:<width$}  {:>8.4}  {:>6}  {:>7}\n",
                r.accuracy, r.n, r.flagged
            );
        }
        out += &format!("{:<width$}  {:>8.4}\n", "aggregate", self.aggregate);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::toy::ConstantScorer;
    use crate::generation::ModelError;

    fn item(set: &str, cands: &[&str], correct: usize) -> ChallengeItem {
        let ctx = vec!["a".to_string(), "b".into(), "c".into()];
        ChallengeItem::new(
            "g",
            set,
            ctx.clone(),
            "src",
            ctx,
            cands.iter().map(|s| s.to_string()).collect(),
            correct,
        )
        .unwrap()
    }

    /// +1 for the candidate "good", 0 otherwise.
    struct Oracle;
    impl Scorer for Oracle {
        fn score(&self, _: &[String], tgt: &[String]) -> std::result::Result<f64, ModelError> {
            Ok(if tgt[3] == "good" { 1.0 } else { 0.0 })
        }
    }

    struct FailOn(&'static str);
    impl Scorer for FailOn {
        fn score(&self, _: &[String], tgt: &[String]) -> std::result::Result<f64, ModelError> {
            if tgt[3] == self.0 {
                Err(ModelError::Remote("nope".into()))
            } else {
                Ok(0.0)
            }
        }
    }

    #[test]
    fn strict_preference() {
        let items = vec![item("deixis", &["bad", "good"], 1)];
        assert_eq!(score_challenge(&items, &Oracle, Default::default()).per_set["deixis"].accuracy, 1.0);
        assert_eq!(score_challenge(&items, &ConstantScorer(-3.0), Default::default()).aggregate, 0.0);
    }

    #[test]
    fn failures_flagged() {
        let items = vec![item("x", &["good", "boom"], 0), item("x", &["good", "bad"], 0)];
        let r = score_challenge(&items, &FailOn("boom"), Default::default());
        assert_eq!(r.per_set["x"].flagged, 1);
        assert_eq!(r.per_set["x"].correct, 0);
    }

    #[test]
    fn length_normalisation() {
        struct PerToken;
        impl Scorer for PerToken {
            fn score(&self, _: &[String], tgt: &[String]) -> std::result::Result<f64, ModelError> {
                Ok(-(tgt[3].split_whitespace().count() as f64) * if tgt[3].starts_with('x') { 1.0 } else { 2.0 })
            }
        }
        // raw: "x x x x" = -4, "y" = -2 -> y wins; per token: -1 vs -2 -> x wins
        let items = vec![item("s", &["x x x x", "y"], 0)];
        assert_eq!(score_challenge(&items, &PerToken, Default::default()).aggregate, 0.0);
        let opts = ChallengeOptions { length_norm: true };
        assert_eq!(score_challenge(&items, &PerToken, opts).aggregate, 1.0);
    }

    #[test]
    fn aggregate_table_values() {
        let mean = aggregate([86.6, 74.9, 75.5, 77.9]);
        assert!((mean - 78.725).abs() < 1e-12);
        assert_eq!(aggregate([0.7; 4]), 0.7);
        assert_eq!(aggregate([1.0, 0.0, 0.0, 0.0]), 0.25);
    }

    #[test]
    fn aggregate_needs_all_four() {
        let items: Vec<_> = CHALLENGE_SETS[..3].iter().map(|s| item(s, &["good", "bad"], 0)).collect();
        let r = score_challenge(&items, &Oracle, Default::default());
        assert!(matches!(aggregate_challenge(&r), Err(Error::MissingSet(s)) if s == "ellipsis_vp"));
        let mut items = items;
        items.push(item("ellipsis_vp", &["bad", "good"], 0));
        let r = score_challenge(&items, &Oracle, Default::default());
        assert_eq!(aggregate_challenge(&r).unwrap(), 0.75);
        assert!(r.render_table().contains("aggregate"));
    }
}
