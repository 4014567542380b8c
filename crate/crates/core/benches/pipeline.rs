//! Single worker against the full pool on the parallel stages.
//!
//! Built without the `parallel` feature, every stage runs once, sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use docctx_core::completion::{complete_dataset, Completer, RandomPool};
use docctx_core::eval::{bleu, score_challenge, ChallengeOptions};
use docctx_core::generation::toy::UnigramScorer;
use docctx_core::ingest::{extract_windows, FilterIndex, SubtitleLine};
use docctx_core::{ChallengeItem, ContextualExample, ReservedTokens, SentencePair};

struct Runner {
    name: String,
    #[cfg(feature = "parallel")]
    pool: rayon::ThreadPool,
}

impl Runner {
    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        {
            self.pool.install(f)
        }
        #[cfg(not(feature = "parallel"))]
        {
            f()
        }
    }
}

#[cfg(feature = "parallel")]
fn runners() -> Vec<Runner> {
    let full = rayon::current_num_threads();
    let mut sizes = vec![1];
    if full > 1 {
        sizes.push(full);
    }
    sizes
        .into_iter()
        .map(|n| Runner {
            name: format!("{n}-threads"),
            pool: rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap(),
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn runners() -> Vec<Runner> {
    vec![Runner { name: "sequential".into() }]
}

fn corpus(n: usize) -> Vec<ContextualExample> {
    let t = ReservedTokens::default();
    (0..n)
        .map(|i| {
            let p = SentencePair::new(format!("source sentence {i}"), format!("target sentence {i}"), &t).unwrap();
            ContextualExample::missing(i.to_string(), p)
        })
        .collect()
}

fn subtitles(shows: usize, per_show: usize) -> Vec<SubtitleLine> {
    let mut out = Vec::with_capacity(shows * per_show);
    for s in 0..shows {
        for k in 0..per_show {
            let t = k as f64 * 1.5 + (k / 20) as f64 * 10.0;
            let text = format!("show {s} line {k} with a few words");
            out.push(SubtitleLine::new(format!("s{s}"), t, Some(t + 1.0), text).unwrap());
        }
    }
    out
}

fn bench_completion(c: &mut Criterion) {
    let data = corpus(20_000);
    let pool = RandomPool::from_examples(&data);
    let t = ReservedTokens::default();
    let completer = Completer::Copy { copies: 2, pool: &pool };
    let mut g = c.benchmark_group("complete_copy2_20k");
    for r in runners() {
        g.bench_function(BenchmarkId::from_parameter(&r.name), |b| {
            b.iter(|| r.run(|| complete_dataset(black_box(&data), &completer, 1, "bench", &t)))
        });
    }
    g.finish();
}

fn bench_extraction(c: &mut Criterion) {
    let lines = subtitles(200, 200);
    let mut index = FilterIndex::default();
    for k in (0..200).step_by(7) {
        index.insert(&format!("show 3 line {k} with a few words"));
    }
    let mut g = c.benchmark_group("extract_filter_40k_lines");
    for r in runners() {
        g.bench_function(BenchmarkId::from_parameter(&r.name), |b| {
            b.iter(|| r.run(|| extract_windows(black_box(&lines), 2.0, 4, &index).unwrap()))
        });
    }
    g.finish();
}

fn bench_bleu(c: &mut Criterion) {
    let refs: Vec<String> = (0..5_000)
        .map(|i| format!("The quick brown fox ({i}) jumps over the lazy dog, again and again."))
        .collect();
    let hyps: Vec<String> = refs.iter().map(|r| r.replace("lazy", "sleepy")).collect();
    let mut g = c.benchmark_group("bleu_5k_segments");
    for r in runners() {
        g.bench_function(BenchmarkId::from_parameter(&r.name), |b| {
            b.iter(|| r.run(|| bleu(black_box(&hyps), &refs).unwrap()))
        });
    }
    g.finish();
}

fn bench_challenge(c: &mut Criterion) {
    let train: Vec<String> = (0..2_000).map(|i| format!("w{} w{} w{}", i % 50, i % 7, i % 13)).collect();
    let scorer = UnigramScorer::from_sentences(train.iter().map(String::as_str)).unwrap();
    let ctx = vec!["a".to_string(), "b".into(), "c".into()];
    let items: Vec<ChallengeItem> = (0..2_500)
        .map(|i| {
            let cands = vec![format!("w{} w3", i % 50), format!("w{} w9 x", i % 13)];
            ChallengeItem::new(i.to_string(), "deixis", ctx.clone(), "s", ctx.clone(), cands, i % 2).unwrap()
        })
        .collect();
    let mut g = c.benchmark_group("challenge_2500_items");
    for r in runners() {
        g.bench_function(BenchmarkId::from_parameter(&r.name), |b| {
            b.iter(|| r.run(|| score_challenge(black_box(&items), &scorer, ChallengeOptions::default())))
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_completion, bench_extraction, bench_bleu, bench_challenge
}
criterion_main!(benches);
