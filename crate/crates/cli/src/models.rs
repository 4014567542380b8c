//! Model specs on the command line: `toy:<name>[=<arg>]` or an external command.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use docctx_core::generation::external::{ExternalModel, Role};
use docctx_core::generation::toy::{
    ConstantScorer, IdentityTranslator, ToyGenerator, UnigramScorer, UppercaseTranslator,
};
use docctx_core::generation::{ContextGenerator, Scorer, Translator};
use docctx_core::ingest::parse_parallel;
use docctx_core::ReservedTokens;

use crate::io;

/// A loaded model; external ones are shut down explicitly so their stats
/// can be checked.
pub enum Loaded<T: ?Sized> {
    Toy(Box<T>),
    External(ExternalModel),
}

impl<T: ?Sized> Loaded<T> {
    pub fn finish(self) -> Result<()> {
        if let Loaded::External(m) = self {
            let stats = m.shutdown().context("shutting down external model")?;
            log::info!("external model: {} requests, {} responses", stats.requests, stats.responses);
        }
        Ok(())
    }
}

macro_rules! as_dyn {
    ($name:ident, $tr:ident) => {
        impl Loaded<dyn $tr> {
            pub fn $name(&self) -> &dyn $tr {
                match self {
                    Loaded::Toy(b) => b.as_ref(),
                    Loaded::External(m) => m,
                }
            }
        }
    };
}
as_dyn!(generator, ContextGenerator);
as_dyn!(translator, Translator);
as_dyn!(scorer, Scorer);

fn toy(spec: &str) -> Option<(&str, Option<&str>)> {
    let rest = spec.strip_prefix("toy:")?;
    Some(match rest.split_once('=') {
        Some((name, arg)) => (name, Some(arg)),
        None => (rest, None),
    })
}

fn external(spec: &str, role: Role, timeout: Duration) -> Result<ExternalModel> {
    ExternalModel::spawn(spec, role, timeout).with_context(|| format!("starting {spec:?}"))
}

/// `toy:echo`, `toy:table=<json file>` or a command.
pub fn generator(spec: &str, timeout: Duration) -> Result<Loaded<dyn ContextGenerator>> {
    match toy(spec) {
        Some(("echo", None)) => Ok(Loaded::Toy(Box::new(ToyGenerator::echo()))),
        Some(("table", Some(path))) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            let table: HashMap<String, [String; 3]> =
                serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
            Ok(Loaded::Toy(Box::new(ToyGenerator::new(table))))
        }
        Some(_) => bail!("unknown toy generator {spec:?} (toy:echo, toy:table=<file>)"),
        None => Ok(Loaded::External(external(spec, Role::Generator, timeout)?)),
    }
}

/// `toy:identity`, `toy:upper` or a command.
pub fn translator(spec: &str, timeout: Duration) -> Result<Loaded<dyn Translator>> {
    match toy(spec) {
        Some(("identity", None)) => Ok(Loaded::Toy(Box::new(IdentityTranslator))),
        Some(("upper", None)) => Ok(Loaded::Toy(Box::new(UppercaseTranslator))),
        Some(_) => bail!("unknown toy translator {spec:?} (toy:identity, toy:upper)"),
        None => Ok(Loaded::External(external(spec, Role::Translator, timeout)?)),
    }
}

/// Unigram model over every target sentence of a parallel corpus.
pub fn unigram_from_corpus(path: &Path, tokens: &ReservedTokens) -> Result<UnigramScorer> {
    let examples = parse_parallel(io::open(path)?, tokens)?;
    let sentences = examples.iter().flat_map(|ex| {
        ex.context()
            .into_iter()
            .flatten()
            .chain(std::iter::once(ex.current()))
            .map(|p| p.tgt())
    });
    UnigramScorer::from_sentences(sentences)
        .with_context(|| format!("{} has no target tokens", path.display()))
}

/// `toy:unigram=<corpus>`, `toy:constant[=<value>]` or a command.
pub fn scorer(spec: &str, timeout: Duration, tokens: &ReservedTokens) -> Result<Loaded<dyn Scorer>> {
    match toy(spec) {
        Some(("unigram", Some(path))) => Ok(Loaded::Toy(Box::new(unigram_from_corpus(
            Path::new(path),
            tokens,
        )?))),
        Some(("constant", v)) => {
            let v = v.map_or(Ok(0.0), str::parse).context("toy:constant value")?;
            Ok(Loaded::Toy(Box::new(ConstantScorer(v))))
        }
        Some(_) => bail!("unknown toy scorer {spec:?} (toy:unigram=<corpus>, toy:constant[=v])"),
        None => Ok(Loaded::External(external(spec, Role::Scorer, timeout)?)),
    }
}
