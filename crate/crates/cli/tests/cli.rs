use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn docctx() -> Command {
    Command::new(env!("CARGO_BIN_EXE_docctx"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = docctx().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "docctx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 40 examples, every fourth with real context.
fn write_corpus(dir: &Path, name: &str) -> PathBuf {
    let mut text = String::new();
    for i in 0..40 {
        let rec = if i % 4 == 0 {
            serde_json::json!({
                "id": format!("e{i}"),
                "ctx_src": [format!("a{i}"), format!("b{i}"), format!("c{i}")],
                "ctx_tgt": [format!("A{i}"), format!("B{i}"), format!("C{i}")],
                "src": format!("s{i} here"), "tgt": format!("t{i} there"),
            })
        } else {
            serde_json::json!({"id": format!("e{i}"), "ctx_src": null, "ctx_tgt": null,
                               "src": format!("s{i} here"), "tgt": format!("t{i} there")})
        };
        text += &rec.to_string();
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Three shows of subtitle lines, one second apart with a long break every
/// seventh line.
fn write_subtitles(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for show in 0..3 {
        let mut t = 0.0;
        for k in 0..30 {
            t += if k % 7 == 6 { 5.0 } else { 1.0 };
            let rec = serde_json::json!({"show_id": format!("s{show}"), "start_s": t,
                                         "end_s": t + 0.5, "text": format!("line {show} {k} words here")});
            text += &rec.to_string();
            text.push('\n');
        }
    }
    let path = dir.join("subs.jsonl");
    std::fs::write(&path, text).unwrap();
    path
}

fn stats_of(out: &Output) -> Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().rev().find(|l| l.starts_with('{')).expect("stats line on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn complete_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        run_ok(&["complete", "--strategy", "copy:2", "--seed", "1", "--in", p(&corpus), "--out", p(out)]);
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert!(!dir.path().join("a.jsonl.partial").exists());
    let c = dir.path().join("c2.jsonl");
    run_ok(&["complete", "--strategy", "copy:2", "--seed", "2", "--in", p(&corpus), "--out", p(&c)]);
    assert_ne!(bytes, std::fs::read(&c).unwrap());
}

#[test]
fn stats_reports_real_context_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let out = run_ok(&["stats", "--in", p(&corpus)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["real_context_fraction"], 0.25);
    assert_eq!(v["examples"], 40);
    assert_eq!(v["missing"], 30);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = docctx().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn version_matches_stats_build() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let v = run_ok(&["--version"]);
    let version = String::from_utf8(v.stdout).unwrap();
    let out = run_ok(&["ingest", "--in", p(&corpus), "--out", p(&dir.path().join("o.jsonl"))]);
    assert_eq!(stats_of(&out)["build"].as_str().unwrap(), version.trim());
}

#[test]
fn errors_exit_nonzero_without_final_output() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out_path = dir.path().join("o.jsonl");
    let out = docctx()
        .args(["complete", "--strategy", "copy:2", "--in", p(&missing), "--out", p(&out_path)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    assert!(!out_path.exists());

    let corpus = write_corpus(dir.path(), "c.jsonl");
    let out = docctx()
        .args(["complete", "--strategy", "copy:9", "--in", p(&corpus), "--out", p(&out_path)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out_path.exists());

    let out = docctx()
        .args(["--sep", "<x>", "--tag", "<x>", "stats", "--in", p(&corpus)])
        .output()
        .unwrap();
    assert!(!out.status.success(), "identical separator and tag accepted");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, format!("strategy = copy:3\nseed = 5\nin = {}\n", p(&corpus))).unwrap();
    let a = dir.path().join("a.jsonl");
    let out = run_ok(&["--config", p(&cfg), "complete", "--out", p(&a)]);
    let s = stats_of(&out);
    assert_eq!(s["strategy"], "copy:3");
    assert_eq!(s["seed"], 5);
    let out = run_ok(&["--config", p(&cfg), "--seed", "6", "complete", "--strategy", "copy:1", "--out", p(&a)]);
    let s = stats_of(&out);
    assert_eq!((s["strategy"].as_str(), s["seed"].as_u64()), (Some("copy:1"), Some(6)));
}

fn pipeline(dir: &Path, workers: &str) -> Vec<u8> {
    let subs = write_subtitles(dir);
    let bilingual = write_corpus(dir, "bi.jsonl");
    let f = |n: &str| dir.join(n);
    let w = ["--workers", workers, "--seed", "11"];
    let cmd = |args: &[&str]| {
        let mut all: Vec<&str> = w.to_vec();
        all.extend_from_slice(args);
        run_ok(&all)
    };
    cmd(&["extract-mono", "--subs", p(&subs), "--eval", p(&bilingual), "--out", p(&f("win.jsonl"))]);
    cmd(&["backtranslate", "--translator", "toy:identity", "--in", p(&f("win.jsonl")), "--out", p(&f("bt.jsonl"))]);
    cmd(&["mix", "--bilingual", p(&bilingual), "--synthetic", p(&f("bt.jsonl")), "--ratio", "1.0", "--out", p(&f("mix.jsonl"))]);
    cmd(&["complete", "--strategy", "copy:2", "--pool", p(&bilingual), "--in", p(&f("mix.jsonl")), "--out", p(&f("done.jsonl"))]);
    cmd(&["pack", "--format", "bin", "--in", p(&f("done.jsonl")), "--out", p(&f("batches.bin")), "--vocab-out", p(&f("vocab.txt"))]);
    cmd(&["pack", "--geometry", "context", "--side", "tgt", "--in", p(&f("done.jsonl")), "--out", p(&f("batches.jsonl"))]);
    let mut bytes = Vec::new();
    for n in ["win.jsonl", "bt.jsonl", "mix.jsonl", "done.jsonl", "batches.bin", "vocab.txt", "batches.jsonl"] {
        let b = std::fs::read(f(n)).unwrap();
        assert!(!b.is_empty(), "{n} is empty");
        bytes.extend(b);
    }
    bytes
}

#[test]
fn pipeline_is_identical_across_runs_and_worker_counts() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = pipeline(dirs[0].path(), "1");
    let b = pipeline(dirs[1].path(), "8");
    let c = pipeline(dirs[2].path(), "8");
    assert!(a == b && b == c);
}

#[test]
fn bleu_and_challenge_reports() {
    let dir = tempfile::tempdir().unwrap();
    let hyp = dir.path().join("hyp.txt");
    let reference = dir.path().join("ref.txt");
    std::fs::write(&hyp, "the cat sat on the mat\nHello, world!\n").unwrap();
    std::fs::write(&reference, "the cat sat on the mat\nHello, world!\n").unwrap();
    let out = run_ok(&["score-bleu", "--hyp", p(&hyp), "--ref", p(&reference)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["bleu"], 100.0);

    let corpus = write_corpus(dir.path(), "c.jsonl");
    let items = dir.path().join("items.jsonl");
    let mut text = String::new();
    for (i, set) in ["deixis", "lex_cohesion", "ellipsis_infl", "ellipsis_vp"].iter().enumerate() {
        // "there" occurs in the corpus targets, "nowhere" does not
        let rec = serde_json::json!({"group_id": format!("g{i}"), "set": set,
            "src_context": ["a", "b", "c"], "src": "s", "tgt_context": ["A", "B", "C"],
            "candidates": ["nowhere", "there"], "correct": 1});
        text += &rec.to_string();
        text.push('\n');
    }
    std::fs::write(&items, text).unwrap();
    let scorer = format!("toy:unigram={}", p(&corpus));
    let out = run_ok(&["score-challenge", "--items", p(&items), "--scorer", &scorer]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["aggregate"], 1.0);
    let out = run_ok(&["score-challenge", "--items", p(&items), "--scorer", "toy:constant", "--table"]);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("aggregate") && table.contains("0.0000"));
}

#[test]
fn serve_toy_backs_external_models() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let exe = env!("CARGO_BIN_EXE_docctx");
    let out_ext = dir.path().join("ext.jsonl");
    let out_toy = dir.path().join("toy.jsonl");
    let upper = format!("{exe} serve-toy --upper");
    run_ok(&["complete", "--strategy", "generated", "--generator", &format!("{exe} serve-toy"),
             "--translator", &upper, "--in", p(&corpus), "--out", p(&out_ext)]);
    run_ok(&["complete", "--strategy", "generated", "--generator", "toy:echo",
             "--translator", "toy:upper", "--in", p(&corpus), "--out", p(&out_toy)]);
    assert_eq!(std::fs::read(&out_ext).unwrap(), std::fs::read(&out_toy).unwrap());

    let windows = dir.path().join("w.jsonl");
    std::fs::write(&windows, r#"{"origin_id":"d#0","start_index":0,"sentences":["one","two","three","four"]}"#).unwrap();
    let bt = dir.path().join("bt.jsonl");
    let out = run_ok(&["backtranslate", "--translator", &upper, "--mode", "last", "--in", p(&windows), "--out", p(&bt)]);
    assert_eq!(stats_of(&out)["emitted"], 1);
    let rec: Value = serde_json::from_str(std::fs::read_to_string(&bt).unwrap().trim()).unwrap();
    assert_eq!(rec["src"], "<BT> FOUR");
    assert_eq!(rec["ctx_src"], serde_json::json!([null, null, null]));
}

#[test]
fn stats_out_file_and_packing_drops() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = write_corpus(dir.path(), "c.jsonl");
    let stats = dir.path().join("stats.json");
    let out = dir.path().join("b.jsonl");
    run_ok(&["--stats-out", p(&stats), "pack", "--max-len", "2", "--in", p(&corpus), "--out", p(&out)]);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(s["command"], "pack");
    assert_eq!(s["items_in"], 40);
    // context-free examples have 2 tokens, the others 2 + 3 + 3 separators
    assert_eq!(s["dropped_too_long"], 10);
    assert_eq!(s["items_packed"], 30);
}
