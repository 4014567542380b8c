//! Shared data types, reserved tokens and the per-example random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Number of context pairs in a complete example.
pub const CONTEXT_LEN: usize = 3;
/// Sentences per monolingual window (three context + the last one).
pub const WINDOW_LEN: usize = 4;

pub const DEFAULT_SEP: &str = "<sep>";
pub const DEFAULT_TAG: &str = "<BT>";

/// The separator and back-translation tag tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReservedTokens {
    pub sep: String,
    pub tag: String,
}

impl Default for ReservedTokens {
    fn default() -> Self {
        Self {
            sep: DEFAULT_SEP.to_string(),
            tag: DEFAULT_TAG.to_string(),
        }
    }
}

impl ReservedTokens {
    pub fn new(sep: impl Into<String>, tag: impl Into<String>) -> Result<Self> {
        let tokens = Self {
            sep: sep.into(),
            tag: tag.into(),
        };
        for (name, tok) in [("separator", &tokens.sep), ("tag", &tokens.tag)] {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "{name} token {tok:?} must be non-empty without whitespace"
                )));
            }
        }
        if tokens.sep.contains(&tokens.tag) || tokens.tag.contains(&tokens.sep) {
            return Err(Error::Config(format!(
                "separator {:?} and tag {:?} must be distinct",
                tokens.sep, tokens.tag
            )));
        }
        Ok(tokens)
    }

    fn reserved_in(&self, text: &str) -> Option<&str> {
        [&self.sep, &self.tag]
            .into_iter()
            .find(|tok| text.contains(tok.as_str()))
            .map(String::as_str)
    }
}

/// One aligned source/target sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    src: String,
    tgt: String,
}

impl SentencePair {
    /// Rejects empty sides and sides containing a reserved token.
    pub fn new(
        src: impl Into<String>,
        tgt: impl Into<String>,
        tokens: &ReservedTokens,
    ) -> Result<Self> {
        let (src, tgt) = (src.into(), tgt.into());
        for (side, text) in [("src", &src), ("tgt", &tgt)] {
            if text.trim().is_empty() {
                return Err(Error::InvalidPair(format!("{side} is empty")));
            }
            if let Some(tok) = tokens.reserved_in(text) {
                return Err(Error::InvalidPair(format!(
                    "{side} {text:?} contains reserved token {tok:?}"
                )));
            }
        }
        Ok(Self { src, tgt })
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    pub fn tgt(&self) -> &str {
        &self.tgt
    }
}

/// Where the content of a context slot came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Missing,
    Random,
    Copy,
    Generated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Missing => "missing",
            Provenance::Random => "random",
            Provenance::Copy => "copy",
            Provenance::Generated => "generated",
        }
    }
}

/// Three context pairs plus the current pair.
///
/// Context is either absent (every slot `Missing`) or complete. `Real` never
/// mixes with other provenances.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextualExample {
    id: String,
    context: Option<[SentencePair; CONTEXT_LEN]>,
    provenance: [Provenance; CONTEXT_LEN],
    current: SentencePair,
    tagged: bool,
}

impl ContextualExample {
    /// An example with no context yet.
    pub fn missing(id: impl Into<String>, current: SentencePair) -> Self {
        Self {
            id: id.into(),
            context: None,
            provenance: [Provenance::Missing; CONTEXT_LEN],
            current,
            tagged: false,
        }
    }

    /// An example with genuine document context.
    pub fn real(
        id: impl Into<String>,
        context: [SentencePair; CONTEXT_LEN],
        current: SentencePair,
    ) -> Self {
        Self {
            id: id.into(),
            context: Some(context),
            provenance: [Provenance::Real; CONTEXT_LEN],
            current,
            tagged: false,
        }
    }

    /// Builds an example with arbitrary provenance, checking the invariants.
    pub fn new(
        id: impl Into<String>,
        context: Option<[SentencePair; CONTEXT_LEN]>,
        provenance: [Provenance; CONTEXT_LEN],
        current: SentencePair,
        tagged: bool,
    ) -> Result<Self> {
        let ex = Self {
            id: id.into(),
            context,
            provenance,
            current,
            tagged,
        };
        ex.check()?;
        Ok(ex)
    }

    fn check(&self) -> Result<()> {
        let missing = self
            .provenance
            .iter()
            .filter(|p| **p == Provenance::Missing)
            .count();
        match (&self.context, missing) {
            (None, CONTEXT_LEN) => {}
            (None, _) => {
                return Err(Error::InvalidExample(format!(
                    "{}: context absent but provenance is {:?}",
                    self.id, self.provenance
                )))
            }
            (Some(_), 0) => {}
            (Some(_), _) => {
                return Err(Error::InvalidExample(format!(
                    "{}: context present but provenance is {:?}",
                    self.id, self.provenance
                )))
            }
        }
        let real = self
            .provenance
            .iter()
            .filter(|p| **p == Provenance::Real)
            .count();
        if real != 0 && real != CONTEXT_LEN {
            return Err(Error::InvalidExample(format!(
                "{}: real context mixed with other provenance {:?}",
                self.id, self.provenance
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn context(&self) -> Option<&[SentencePair; CONTEXT_LEN]> {
        self.context.as_ref()
    }

    pub fn provenance(&self) -> [Provenance; CONTEXT_LEN] {
        self.provenance
    }

    pub fn current(&self) -> &SentencePair {
        &self.current
    }

    pub fn tagged(&self) -> bool {
        self.tagged
    }

    pub fn is_missing(&self) -> bool {
        self.context.is_none()
    }

    pub fn is_real(&self) -> bool {
        self.provenance[0] == Provenance::Real
    }

    pub fn with_tagged(mut self, tagged: bool) -> Self {
        self.tagged = tagged;
        self
    }

    /// Replaces the context of a `Missing` example. The current pair is kept.
    pub fn completed(
        &self,
        context: [SentencePair; CONTEXT_LEN],
        provenance: [Provenance; CONTEXT_LEN],
    ) -> Result<Self> {
        if !self.is_missing() {
            return Err(Error::InvalidExample(format!(
                "{}: only examples with missing context can be completed",
                self.id
            )));
        }
        if provenance
            .iter()
            .any(|p| matches!(p, Provenance::Missing | Provenance::Real))
        {
            return Err(Error::InvalidExample(format!(
                "{}: completion provenance must be random/copy/generated, got {provenance:?}",
                self.id
            )));
        }
        Self::new(
            self.id.clone(),
            Some(context),
            provenance,
            self.current.clone(),
            self.tagged,
        )
    }

    /// Source text as emitted: prefixed with `tag + " "` on tagged examples.
    pub fn render_src(&self, text: &str, tokens: &ReservedTokens) -> String {
        if self.tagged {
            format!("{} {}", tokens.tag, text)
        } else {
            text.to_string()
        }
    }

    pub fn to_record(&self, tokens: &ReservedTokens) -> ExampleRecord {
        let (ctx_src, ctx_tgt) = match &self.context {
            Some(ctx) => (
                ctx.iter()
                    .map(|p| Some(self.render_src(p.src(), tokens)))
                    .collect(),
                ctx.iter().map(|p| Some(p.tgt().to_string())).collect(),
            ),
            None => (vec![None; CONTEXT_LEN], vec![None; CONTEXT_LEN]),
        };
        ExampleRecord {
            id: self.id.clone(),
            ctx_src: Some(ctx_src),
            ctx_tgt: Some(ctx_tgt),
            src: self.render_src(self.current.src(), tokens),
            tgt: self.current.tgt().to_string(),
            provenance: Some(self.provenance.to_vec()),
            tagged: self.tagged,
        }
    }

    pub fn from_record(rec: ExampleRecord, tokens: &ReservedTokens) -> Result<Self> {
        let tagged = rec.tagged;
        let untag = |text: String| -> Result<String> {
            if !tagged {
                return Ok(text);
            }
            let prefix = format!("{} ", tokens.tag);
            text.strip_prefix(&prefix)
                .map(str::to_string)
                .ok_or_else(|| {
                    Error::InvalidExample(format!(
                        "{}: tagged example source {text:?} does not start with {prefix:?}",
                        rec.id
                    ))
                })
        };
        let slots = |side: &str, v: Option<Vec<Option<String>>>| -> Result<Vec<Option<String>>> {
            match v {
                None => Ok(vec![None; CONTEXT_LEN]),
                Some(v) if v.len() == CONTEXT_LEN => Ok(v),
                Some(v) => Err(Error::InvalidExample(format!(
                    "{}: {side} has {} slots, expected {CONTEXT_LEN}",
                    rec.id,
                    v.len()
                ))),
            }
        };
        let ctx_src = slots("ctx_src", rec.ctx_src.clone())?;
        let ctx_tgt = slots("ctx_tgt", rec.ctx_tgt.clone())?;
        let filled = ctx_src
            .iter()
            .chain(ctx_tgt.iter())
            .filter(|s| s.is_some())
            .count();

        let context = if filled == 0 {
            None
        } else if filled == 2 * CONTEXT_LEN {
            let mut pairs = Vec::with_capacity(CONTEXT_LEN);
            for (s, t) in ctx_src.into_iter().zip(ctx_tgt) {
                let (s, t) = (s.unwrap_or_default(), t.unwrap_or_default());
                pairs.push(SentencePair::new(untag(s)?, t, tokens)?);
            }
            Some(pairs.try_into().expect("three context pairs"))
        } else {
            return Err(Error::InvalidExample(format!(
                "{}: {filled} of {} context slots are filled; context must be all or nothing",
                rec.id,
                2 * CONTEXT_LEN
            )));
        };

        let provenance = match rec.provenance {
            Some(p) => p.try_into().map_err(|p: Vec<Provenance>| {
                Error::InvalidExample(format!(
                    "{}: provenance has {} entries, expected {CONTEXT_LEN}",
                    rec.id,
                    p.len()
                ))
            })?,
            None if context.is_some() => [Provenance::Real; CONTEXT_LEN],
            None => [Provenance::Missing; CONTEXT_LEN],
        };
        let current = SentencePair::new(untag(rec.src)?, rec.tgt, tokens)?;
        Self::new(rec.id, context, provenance, current, tagged)
    }
}

/// JSONL wire form of a [`ContextualExample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    #[serde(default)]
    pub ctx_src: Option<Vec<Option<String>>>,
    #[serde(default)]
    pub ctx_tgt: Option<Vec<Option<String>>>,
    pub src: String,
    pub tgt: String,
    #[serde(default)]
    pub provenance: Option<Vec<Provenance>>,
    #[serde(default)]
    pub tagged: bool,
}

/// Consecutive target-language sentences from one monolingual document.
///
/// Windows produced by the default pipeline hold [`WINDOW_LEN`] sentences;
/// other lengths are accepted so that `window_documents` can honour any `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "MonoWindowRecord")]
pub struct MonoWindow {
    origin_id: String,
    start_index: usize,
    sentences: Vec<String>,
}

#[derive(Deserialize)]
struct MonoWindowRecord {
    origin_id: String,
    start_index: usize,
    sentences: Vec<String>,
}

impl TryFrom<MonoWindowRecord> for MonoWindow {
    type Error = Error;

    fn try_from(r: MonoWindowRecord) -> Result<Self> {
        MonoWindow::new(r.origin_id, r.start_index, r.sentences)
    }
}

impl MonoWindow {
    pub fn new(
        origin_id: impl Into<String>,
        start_index: usize,
        sentences: Vec<String>,
    ) -> Result<Self> {
        let origin_id = origin_id.into();
        if sentences.is_empty() {
            return Err(Error::InvalidWindow(format!("{origin_id}: no sentences")));
        }
        if let Some(i) = sentences.iter().position(|s| s.trim().is_empty()) {
            return Err(Error::InvalidWindow(format!(
                "{origin_id}@{start_index}: sentence {i} is empty"
            )));
        }
        Ok(Self {
            origin_id,
            start_index,
            sentences,
        })
    }

    pub fn origin_id(&self) -> &str {
        &self.origin_id
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }
}

/// One contrastive multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ChallengeRecord", into = "ChallengeRecord")]
pub struct ChallengeItem {
    group_id: String,
    set: String,
    src_context: Vec<String>,
    src: String,
    tgt_context: Vec<String>,
    candidates: Vec<String>,
    correct_index: usize,
}

/// JSONL wire form of a [`ChallengeItem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChallengeRecord {
    pub group_id: String,
    #[serde(default)]
    pub set: String,
    pub src_context: Vec<String>,
    pub src: String,
    pub tgt_context: Vec<String>,
    pub candidates: Vec<String>,
    pub correct: usize,
}

impl TryFrom<ChallengeRecord> for ChallengeItem {
    type Error = Error;

    fn try_from(r: ChallengeRecord) -> Result<Self> {
        ChallengeItem::new(
            r.group_id,
            r.set,
            r.src_context,
            r.src,
            r.tgt_context,
            r.candidates,
            r.correct,
        )
    }
}

impl From<ChallengeItem> for ChallengeRecord {
    fn from(i: ChallengeItem) -> Self {
        Self {
            group_id: i.group_id,
            set: i.set,
            src_context: i.src_context,
            src: i.src,
            tgt_context: i.tgt_context,
            candidates: i.candidates,
            correct: i.correct_index,
        }
    }
}

impl ChallengeItem {
    pub fn new(
        group_id: impl Into<String>,
        set: impl Into<String>,
        src_context: Vec<String>,
        src: impl Into<String>,
        tgt_context: Vec<String>,
        candidates: Vec<String>,
        correct_index: usize,
    ) -> Result<Self> {
        let group_id = group_id.into();
        let bad = |msg: String| Err(Error::InvalidChallenge(format!("{group_id}: {msg}")));
        if src_context.len() != CONTEXT_LEN || tgt_context.len() != CONTEXT_LEN {
            return bad(format!(
                "contexts must have {CONTEXT_LEN} sentences, got {} / {}",
                src_context.len(),
                tgt_context.len()
            ));
        }
        if candidates.len() < 2 {
            return bad(format!("needs at least 2 candidates, got {}", candidates.len()));
        }
        if correct_index >= candidates.len() {
            return bad(format!(
                "correct index {correct_index} out of range for {} candidates",
                candidates.len()
            ));
        }
        for (i, a) in candidates.iter().enumerate() {
            if candidates[..i].contains(a) {
                return bad(format!("duplicate candidate {a:?}"));
            }
        }
        Ok(Self {
            group_id,
            set: set.into(),
            src_context,
            src: src.into(),
            tgt_context,
            candidates,
            correct_index,
        })
    }

    pub fn group_id(&self) -> &str {
        &self.group_id
    }

    pub fn set(&self) -> &str {
        &self.set
    }

    pub fn src_context(&self) -> &[String] {
        &self.src_context
    }

    pub fn src(&self) -> &str {
        &self.src
    }

    pub fn tgt_context(&self) -> &[String] {
        &self.tgt_context
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn correct_index(&self) -> usize {
        self.correct_index
    }

    /// The four-sentence source document (context then source).
    pub fn src_doc(&self) -> Vec<String> {
        let mut doc = self.src_context.clone();
        doc.push(self.src.clone());
        doc
    }

    /// The four-sentence target document ending with candidate `i`.
    pub fn tgt_doc(&self, i: usize) -> Vec<String> {
        let mut doc = self.tgt_context.clone();
        doc.push(self.candidates[i].clone());
        doc
    }
}

/// Deterministic random stream for one example.
///
/// A pure function of `(global_seed, example_key)`: the order in which
/// examples are processed, and by how many workers, never matters.
#[derive(Debug, Clone)]
pub struct RngStream {
    global_seed: u64,
    example_key: String,
    rng: ChaCha8Rng,
}

/// Derives the stream for `example_key` under `global_seed`.
pub fn derive_rng(global_seed: u64, example_key: &str) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(example_key.as_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    RngStream {
        global_seed,
        example_key: example_key.to_string(),
        rng: ChaCha8Rng::from_seed(seed),
    }
}

impl RngStream {
    pub fn global_seed(&self) -> u64 {
        self.global_seed
    }

    pub fn example_key(&self) -> &str {
        &self.example_key
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
