//! Translation quality metrics.

pub mod bleu;
pub mod challenge;

pub use bleu::{bleu, bleu_with, tokenize_v13a, BleuOptions, BleuReport, BleuStats};
pub use challenge::{
    aggregate, aggregate_challenge, score_challenge, ChallengeOptions, ChallengeReport, SetResult,
    CHALLENGE_SETS,
};
