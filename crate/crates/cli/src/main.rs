mod config;
mod io;
mod models;

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use docctx_core::backtranslation::{backtranslate_windows, mix_corpora, BtConfig, BtMode};
use docctx_core::completion::{complete_dataset, Completer, CompletionStrategy, RandomPool};
use docctx_core::eval::{bleu_with, score_challenge, BleuOptions, ChallengeOptions};
use docctx_core::generation::external::{serve, ServedModels};
use docctx_core::generation::toy::{IdentityTranslator, ToyGenerator, UppercaseTranslator};
use docctx_core::ingest::{self, build_filter_index, extract_windows, parse_parallel, SubtitleLine};
use docctx_core::packing::{self, concat_example, BatchGeometry, BatchRecord, PackItem, Side, Vocab};
use docctx_core::{
    derive_rng, jsonl, par, ChallengeItem, ContextualExample, MonoWindow, Provenance,
    ReservedTokens,
};

use config::ConfigFile;
use io::{open, require_paths, PartialOutput};

#[derive(Parser)]
#[command(name = "docctx", version = version(), about = "Document-level MT corpus toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// key = value file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    sep: Option<String>,
    #[arg(long, global = true)]
    tag: Option<String>,
    /// Write the stats JSON here instead of stderr.
    #[arg(long, global = true)]
    stats_out: Option<PathBuf>,
    /// Per-request timeout for external models, in seconds.
    #[arg(long, global = true)]
    timeout_s: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a parallel corpus and write it back in canonical form.
    Ingest(IoArgs),
    /// Merge subtitles into documents, cut windows, drop eval overlap.
    ExtractMono(ExtractArgs),
    /// Fill in missing context.
    Complete(CompleteArgs),
    /// Turn monolingual windows into tagged synthetic examples.
    Backtranslate(BtArgs),
    /// Mix bilingual and synthetic corpora.
    Mix(MixArgs),
    /// Encode one side of a corpus and lay it out in batches.
    Pack(PackArgs),
    /// Corpus BLEU of a hypothesis file against a reference file.
    ScoreBleu(BleuArgs),
    /// Contrastive challenge-set accuracy.
    ScoreChallenge(ChallengeArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
    /// Answer the external-model protocol on stdin/stdout with toy models.
    ServeToy(ServeArgs),
}

#[derive(Args)]
struct IoArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Subtitle files: JSONL lines, or .srt (show id = file stem).
    #[arg(long, num_args = 1.., required = true)]
    subs: Vec<PathBuf>,
    /// Parallel eval corpora whose current targets are banned.
    #[arg(long, num_args = 1..)]
    eval: Vec<PathBuf>,
    /// Challenge sets whose candidates are banned.
    #[arg(long, num_args = 1..)]
    challenge: Vec<PathBuf>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long)]
    strategy: Option<String>,
    /// Corpus random context is drawn from (default: the input).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Name used in per-example random streams (default: input file stem).
    #[arg(long)]
    corpus_name: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    translator: Option<String>,
}

#[derive(Args)]
struct BtArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long)]
    translator: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    max_tokens: Option<usize>,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    bilingual: Option<PathBuf>,
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Synthetic examples per bilingual example.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    #[command(flatten)]
    io: IoArgs,
    /// sentence (64x128, packed) or context (16x512, one per row).
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    side: Option<String>,
    #[arg(long)]
    format: Option<String>,
    /// Existing vocabulary, one token per line.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Write the vocabulary used here.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
}

#[derive(Args)]
struct BleuArgs {
    /// One segment per line.
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    lowercase: bool,
    /// Also print a one-line text summary on stdout.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct ChallengeArgs {
    #[arg(long, num_args = 1.., required = true)]
    items: Vec<PathBuf>,
    #[arg(long)]
    scorer: Option<String>,
    #[arg(long)]
    length_norm: bool,
    /// Print an aligned table instead of JSON.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Generator table (JSON object last sentence -> three sentences).
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    upper: bool,
    /// Corpus for the unigram scorer.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

fn version() -> &'static str {
    static V: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    let id = V.get_or_init(docctx_core::build_id);
    id.strip_prefix("docctx ").unwrap_or(id)
}

struct Ctx {
    cfg: ConfigFile,
    seed: u64,
    tokens: ReservedTokens,
    timeout: Duration,
    stats_out: Option<PathBuf>,
}

impl Ctx {
    fn emit_stats(&self, command: &str, stats: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("build".into(), json!(docctx_core::build_id()));
        obj.insert("command".into(), json!(command));
        if let Value::Object(m) = stats {
            obj.extend(m);
        }
        let line = Value::Object(obj).to_string();
        match &self.stats_out {
            Some(path) => {
                let mut out = PartialOutput::create(path)?;
                writeln!(out.writer(), "{line}")?;
                out.commit()
            }
            None => {
                eprintln!("{line}");
                Ok(())
            }
        }
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.cfg.require(flag, key)
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let cfg = match &g.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let tokens = ReservedTokens::new(
        cfg.pick_or(g.sep, "sep", docctx_core::model::DEFAULT_SEP.to_string())?,
        cfg.pick_or(g.tag, "tag", docctx_core::model::DEFAULT_TAG.to_string())?,
    )?;
    let timeout_s: f64 = cfg.pick_or(g.timeout_s, "timeout-s", 60.0)?;
    if !(timeout_s.is_finite() && timeout_s > 0.0) {
        bail!("--timeout-s must be positive");
    }
    let workers: Option<usize> = cfg.pick(g.workers, "workers")?;
    let ctx = Ctx {
        seed: cfg.pick_or(g.seed, "seed", 0)?,
        tokens,
        timeout: Duration::from_secs_f64(timeout_s),
        stats_out: cfg.pick(g.stats_out, "stats-out")?,
        cfg,
    };
    let go = move || dispatch(&ctx, cli.command);
    match workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(n) => par::with_workers(n, go),
        None => go(),
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => cmd_ingest(ctx, a),
        Command::ExtractMono(a) => cmd_extract(ctx, a),
        Command::Complete(a) => cmd_complete(ctx, a),
        Command::Backtranslate(a) => cmd_backtranslate(ctx, a),
        Command::Mix(a) => cmd_mix(ctx, a),
        Command::Pack(a) => cmd_pack(ctx, a),
        Command::ScoreBleu(a) => cmd_bleu(ctx, a),
        Command::ScoreChallenge(a) => cmd_challenge(ctx, a),
        Command::Stats(a) => cmd_stats(ctx, a),
        Command::ServeToy(a) => cmd_serve(ctx, a),
    }
}

fn read_examples(path: &Path, tokens: &ReservedTokens) -> Result<Vec<ContextualExample>> {
    parse_parallel(open(path)?, tokens).with_context(|| format!("reading {}", path.display()))
}

fn write_examples(path: &Path, examples: &[ContextualExample], tokens: &ReservedTokens) -> Result<()> {
    let mut out = PartialOutput::create(path)?;
    let records: Vec<_> = examples.iter().map(|e| e.to_record(tokens)).collect();
    jsonl::write(out.writer(), &records)?;
    out.commit()
}

fn real_fraction(examples: &[ContextualExample]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    examples.iter().filter(|e| e.is_real()).count() as f64 / examples.len() as f64
}

fn cmd_ingest(ctx: &Ctx, a: IoArgs) -> Result<()> {
    let input = ctx.path(a.input, "in")?;
    let out = ctx.path(a.out, "out")?;
    require_paths([&input])?;
    let examples = read_examples(&input, &ctx.tokens)?;
    write_examples(&out, &examples, &ctx.tokens)?;
    let missing = examples.iter().filter(|e| e.is_missing()).count();
    ctx.emit_stats(
        "ingest",
        json!({
            "examples_in": examples.len(),
            "examples_out": examples.len(),
            "missing": missing,
            "real_context_fraction": real_fraction(&examples),
        }),
    )
}

fn read_subtitles(path: &Path) -> Result<Vec<SubtitleLine>> {
    let is_srt = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("srt"));
    let lines = if is_srt {
        let mut text = String::new();
        open(path)?.read_to_string(&mut text)?;
        let show = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        ingest::parse_srt(&text, &show)
    } else {
        ingest::parse_subtitles(open(path)?)
    };
    lines.with_context(|| format!("reading {}", path.display()))
}

fn cmd_extract(ctx: &Ctx, a: ExtractArgs) -> Result<()> {
    let out = ctx.path(a.out, "out")?;
    require_paths(a.subs.iter().chain(&a.eval).chain(&a.challenge))?;
    let gap = ctx.cfg.pick_or(a.gap, "gap", ingest::DEFAULT_GAP_S)?;
    let window = ctx.cfg.pick_or(a.window, "window", ingest::DEFAULT_WINDOW)?;
    if window == 0 {
        bail!("--window must be at least 1");
    }
    let mut lines = Vec::new();
    for p in &a.subs {
        lines.extend(read_subtitles(p)?);
    }
    let mut eval = Vec::new();
    for p in &a.eval {
        eval.extend(read_examples(p, &ctx.tokens)?);
    }
    let mut challenges = Vec::new();
    for p in &a.challenge {
        challenges.extend(
            jsonl::read::<ChallengeItem, _>(open(p)?)
                .with_context(|| format!("reading {}", p.display()))?,
        );
    }
    let index = build_filter_index(&eval, &challenges);
    let (windows, stats) = extract_windows(&lines, gap, window, &index)?;
    let mut o = PartialOutput::create(&out)?;
    jsonl::write(o.writer(), &windows)?;
    o.commit()?;
    let mut s = serde_json::to_value(stats)?;
    s["banned_sentences"] = json!(index.len());
    ctx.emit_stats("extract-mono", s)
}

fn cmd_complete(ctx: &Ctx, a: CompleteArgs) -> Result<()> {
    let input = ctx.path(a.io.input, "in")?;
    let out = ctx.path(a.io.out, "out")?;
    let pool_path: Option<PathBuf> = ctx.cfg.pick(a.pool, "pool")?;
    require_paths(std::iter::once(&input).chain(&pool_path))?;
    let strategy: CompletionStrategy = ctx.cfg.require(a.strategy, "strategy")?.parse()?;
    let corpus = match ctx.cfg.pick(a.corpus_name, "corpus-name")? {
        Some(n) => n,
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let examples = read_examples(&input, &ctx.tokens)?;

    let pool;
    let mut generator = None;
    let mut translator = None;
    let completer = match strategy {
        CompletionStrategy::None => Completer::None,
        CompletionStrategy::CopyFamily(copies) => {
            pool = match &pool_path {
                Some(p) => RandomPool::from_examples(&read_examples(p, &ctx.tokens)?),
                None => RandomPool::from_examples(&examples),
            };
            Completer::Copy { copies, pool: &pool }
        }
        CompletionStrategy::Generated => {
            let gspec: String = ctx.cfg.pick_or(a.generator, "generator", "toy:echo".into())?;
            let tspec: String = ctx.cfg.pick_or(a.translator, "translator", "toy:identity".into())?;
            let g = generator.insert(models::generator(&gspec, ctx.timeout)?);
            let t = translator.insert(models::translator(&tspec, ctx.timeout)?);
            Completer::Generated {
                generator: g.generator(),
                translator: t.translator(),
            }
        }
    };
    let outcome = complete_dataset(&examples, &completer, ctx.seed, &corpus, &ctx.tokens);
    for f in outcome.failures.iter().take(10) {
        log::warn!("example {} ({}): {}", f.index + 1, f.id, f.error);
    }
    write_examples(&out, &outcome.examples, &ctx.tokens)?;
    if let Some(m) = generator {
        m.finish()?;
    }
    if let Some(m) = translator {
        m.finish()?;
    }
    let mut s = serde_json::to_value(&outcome.stats)?;
    s["strategy"] = json!(strategy.to_string());
    s["seed"] = json!(ctx.seed);
    s["corpus"] = json!(corpus);
    s["real_context_fraction"] = json!(real_fraction(&outcome.examples));
    ctx.emit_stats("complete", s)
}

fn cmd_backtranslate(ctx: &Ctx, a: BtArgs) -> Result<()> {
    let input = ctx.path(a.io.input, "in")?;
    let out = ctx.path(a.io.out, "out")?;
    require_paths([&input])?;
    let mode: BtMode = ctx.cfg.pick_or(a.mode, "mode", "context".to_string())?.parse()?;
    let cfg = BtConfig {
        tokens: ctx.tokens.clone(),
        mode,
        max_tokens: ctx.cfg.pick_or(
            a.max_tokens,
            "max-tokens",
            docctx_core::backtranslation::DEFAULT_MAX_TOKENS,
        )?,
    };
    let spec: String = ctx.cfg.require(a.translator, "translator")?;
    let windows: Vec<MonoWindow> =
        jsonl::read(open(&input)?).with_context(|| format!("reading {}", input.display()))?;
    let translator = models::translator(&spec, ctx.timeout)?;
    let (examples, stats) = backtranslate_windows(&windows, translator.translator(), &cfg);
    translator.finish()?;
    write_examples(&out, &examples, &ctx.tokens)?;
    let mut s = serde_json::to_value(stats)?;
    s["mode"] = json!(mode.to_string());
    ctx.emit_stats("backtranslate", s)
}

fn cmd_mix(ctx: &Ctx, a: MixArgs) -> Result<()> {
    let b = ctx.path(a.bilingual, "bilingual")?;
    let s = ctx.path(a.synthetic, "synthetic")?;
    let out = ctx.path(a.out, "out")?;
    require_paths([&b, &s])?;
    let ratio = ctx.cfg.pick_or(a.ratio, "ratio", 1.0)?;
    let bilingual = read_examples(&b, &ctx.tokens)?;
    let synthetic = read_examples(&s, &ctx.tokens)?;
    let mut rng = derive_rng(ctx.seed, "mix");
    let (mixed, stats) = mix_corpora(&bilingual, &synthetic, ratio, &mut rng)?;
    write_examples(&out, &mixed, &ctx.tokens)?;
    let mut v = serde_json::to_value(stats)?;
    v["ratio"] = json!(ratio);
    v["examples_out"] = json!(mixed.len());
    v["real_context_fraction"] = json!(real_fraction(&mixed));
    ctx.emit_stats("mix", v)
}

fn geometry(ctx: &Ctx, a: &PackArgs) -> Result<BatchGeometry> {
    let name: String = ctx.cfg.pick_or(a.geometry.clone(), "geometry", "sentence".into())?;
    let base = match name.as_str() {
        "sentence" => BatchGeometry::SENTENCE,
        "context" => BatchGeometry::CONTEXT,
        _ => bail!("--geometry must be sentence or context, got {name:?}"),
    };
    let rows = ctx.cfg.pick_or(a.rows, "rows", base.rows)?;
    let cols = ctx.cfg.pick_or(a.cols, "cols", base.cols)?;
    let default_max = if base.packed { base.max_item_len.min(cols) } else { cols };
    let max_len = ctx.cfg.pick_or(a.max_len, "max-len", default_max)?;
    Ok(BatchGeometry::new(rows, cols, max_len, base.packed)?)
}

fn cmd_pack(ctx: &Ctx, a: PackArgs) -> Result<()> {
    let input = ctx.path(a.io.input.clone(), "in")?;
    let out = ctx.path(a.io.out.clone(), "out")?;
    let vocab_path: Option<PathBuf> = ctx.cfg.pick(a.vocab.clone(), "vocab")?;
    require_paths(std::iter::once(&input).chain(&vocab_path))?;
    let geom = geometry(ctx, &a)?;
    let side: Side = ctx.cfg.pick_or(a.side.clone(), "side", "src".to_string())?.parse()?;
    let format: String = ctx.cfg.pick_or(a.format.clone(), "format", "jsonl".into())?;
    if format != "jsonl" && format != "bin" {
        bail!("--format must be jsonl or bin, got {format:?}");
    }
    let examples = read_examples(&input, &ctx.tokens)?;
    let seqs = par::map_indexed(&examples, |_, ex| concat_example(ex, side, &ctx.tokens));
    let vocab = match &vocab_path {
        Some(p) => Vocab::from_reader(open(p)?, &ctx.tokens)?,
        None => {
            let size = ctx.cfg.pick(a.vocab_size, "vocab-size")?;
            Vocab::build(seqs.iter().map(Vec::as_slice), &ctx.tokens, size)
        }
    };
    if let Some(p) = ctx.cfg.pick::<PathBuf>(a.vocab_out, "vocab-out")? {
        let mut o = PartialOutput::create(&p)?;
        vocab.write_to(o.writer())?;
        o.commit()?;
    }
    let items: Vec<PackItem> = examples
        .iter()
        .zip(&seqs)
        .map(|(ex, s)| PackItem {
            id: ex.id().to_string(),
            ids: vocab.encode(s),
        })
        .collect();
    let outcome = packing::batch_items(&items, &geom)?;
    let mut o = PartialOutput::create(&out)?;
    if format == "bin" {
        for b in &outcome.batches {
            packing::write_bin(o.writer(), b)?;
        }
    } else {
        let records: Vec<BatchRecord> = outcome.batches.iter().map(BatchRecord::from).collect();
        jsonl::write(o.writer(), &records)?;
    }
    o.commit()?;
    let mut s = serde_json::to_value(&outcome.stats)?;
    s["vocab_size"] = json!(vocab.len());
    s["rows"] = json!(geom.rows);
    s["cols"] = json!(geom.cols);
    ctx.emit_stats("pack", s)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading {}", path.display()))
}

fn cmd_bleu(ctx: &Ctx, a: BleuArgs) -> Result<()> {
    let hyp = ctx.path(a.hyp, "hyp")?;
    let reference = ctx.path(a.reference, "ref")?;
    require_paths([&hyp, &reference])?;
    let hyps = read_lines(&hyp)?;
    let refs = read_lines(&reference)?;
    let report = bleu_with(&hyps, &refs, BleuOptions { lowercase: a.lowercase })?;
    let v = serde_json::to_value(&report)?;
    println!("{v}");
    if a.table {
        println!("{report}");
    }
    ctx.emit_stats("score-bleu", json!({ "segments": hyps.len(), "bleu": report.bleu }))
}

fn cmd_challenge(ctx: &Ctx, a: ChallengeArgs) -> Result<()> {
    require_paths(&a.items)?;
    let spec: String = ctx.cfg.require(a.scorer, "scorer")?;
    let mut items = Vec::new();
    for p in &a.items {
        items.extend(
            jsonl::read::<ChallengeItem, _>(open(p)?)
                .with_context(|| format!("reading {}", p.display()))?,
        );
    }
    let scorer = models::scorer(&spec, ctx.timeout, &ctx.tokens)?;
    let length_norm = a.length_norm || ctx.cfg.pick_or(None, "length-norm", false)?;
    let report = score_challenge(&items, scorer.scorer(), ChallengeOptions { length_norm });
    scorer.finish()?;
    if a.table {
        print!("{}", report.render_table());
    } else {
        println!("{}", serde_json::to_value(&report)?);
    }
    let flagged: usize = report.per_set.values().map(|r| r.flagged).sum();
    ctx.emit_stats(
        "score-challenge",
        json!({ "items": items.len(), "flagged": flagged, "aggregate": report.aggregate }),
    )
}

fn cmd_stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let input = ctx.path(a.input, "in")?;
    require_paths([&input])?;
    let examples = read_examples(&input, &ctx.tokens)?;
    let mut provenance: BTreeMap<&str, usize> = BTreeMap::new();
    for ex in &examples {
        if ex.context().is_some() {
            for p in ex.provenance() {
                *provenance.entry(p.as_str()).or_default() += 1;
            }
        }
    }
    let completed = examples
        .iter()
        .filter(|e| e.context().is_some() && e.provenance().iter().any(|p| *p != Provenance::Real))
        .count();
    let v = json!({
        "build": docctx_core::build_id(),
        "examples": examples.len(),
        "real": examples.iter().filter(|e| e.is_real()).count(),
        "missing": examples.iter().filter(|e| e.is_missing()).count(),
        "completed": completed,
        "tagged": examples.iter().filter(|e| e.tagged()).count(),
        "context_slots": provenance,
        "real_context_fraction": real_fraction(&examples),
    });
    println!("{v}");
    Ok(())
}

fn cmd_serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let generator = match &a.table {
        Some(p) => match models::generator(&format!("toy:table={}", p.display()), ctx.timeout)? {
            models::Loaded::Toy(g) => g,
            models::Loaded::External(_) => unreachable!("toy spec"),
        },
        None => Box::new(ToyGenerator::echo()),
    };
    let translator: Box<dyn docctx_core::generation::Translator> = if a.upper {
        Box::new(UppercaseTranslator)
    } else {
        Box::new(IdentityTranslator)
    };
    let scorer = match &a.corpus {
        Some(p) => Some(models::unigram_from_corpus(p, &ctx.tokens)?),
        None => None,
    };
    let served = ServedModels {
        generator: Some(generator.as_ref()),
        translator: Some(translator.as_ref()),
        scorer: scorer.as_ref().map(|s| s as _),
    };
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    let n = serve(stdin, stdout, &served)?;
    log::info!("served {n} requests");
    Ok(())
}
