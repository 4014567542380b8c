//! Parallel-corpus parsing and monolingual window extraction.
//!
//! Subtitle lines are merged into documents whenever consecutive lines of the
//! same show are at most `gap_s` seconds apart, documents are cut into
//! overlapping windows, and windows touching an evaluation sentence are
//! dropped.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ChallengeItem, ContextualExample, ExampleRecord, MonoWindow, ReservedTokens, WINDOW_LEN,
};
use crate::{jsonl, par};

pub const DEFAULT_GAP_S: f64 = 2.0;

/// Reads the parallel-corpus JSONL format.
///
/// Records without context become `Missing` examples, complete ones `Real`
/// (unless they carry an explicit provenance).
pub fn parse_parallel<R: BufRead>(
    reader: R,
    tokens: &ReservedTokens,
) -> Result<Vec<ContextualExample>> {
    jsonl::read_with(reader, |_, rec: ExampleRecord| {
        ContextualExample::from_record(rec, tokens)
    })
}

/// One timestamped subtitle line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSubtitle")]
pub struct SubtitleLine {
    pub show_id: String,
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_s: Option<f64>,
    pub text: String,
}

#[derive(Deserialize)]
struct RawSubtitle {
    show_id: String,
    start_s: f64,
    #[serde(default)]
    end_s: Option<f64>,
    text: String,
}

impl TryFrom<RawSubtitle> for SubtitleLine {
    type Error = Error;

    fn try_from(r: RawSubtitle) -> Result<Self> {
        SubtitleLine::new(r.show_id, r.start_s, r.end_s, r.text)
    }
}

impl SubtitleLine {
    pub fn new(
        show_id: impl Into<String>,
        start_s: f64,
        end_s: Option<f64>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let (show_id, text) = (show_id.into(), text.into());
        if !(start_s.is_finite() && start_s >= 0.0) {
            return Err(Error::InvalidSubtitle(format!(
                "{show_id}: start {start_s} must be a non-negative number"
            )));
        }
        if let Some(end) = end_s {
            if !(end.is_finite() && end >= start_s) {
                return Err(Error::InvalidSubtitle(format!(
                    "{show_id}: end {end} precedes start {start_s}"
                )));
            }
        }
        if text.trim().is_empty() {
            return Err(Error::InvalidSubtitle(format!(
                "{show_id}@{start_s}: empty text"
            )));
        }
        Ok(Self {
            show_id,
            start_s,
            end_s,
            text,
        })
    }
}

/// Reads subtitle JSONL (`{"show_id", "start_s", "end_s"?, "text"}`).
pub fn parse_subtitles<R: BufRead>(reader: R) -> Result<Vec<SubtitleLine>> {
    jsonl::read(reader)
}

/// Minimal SRT reader: every cue becomes one line, multi-line cue text is
/// joined with spaces and simple markup tags are stripped.
pub fn parse_srt(text: &str, show_id: &str) -> Result<Vec<SubtitleLine>> {
    let mut out = Vec::new();
    let text = text.trim_start_matches('\u{feff}').replace("\r\n", "\n");
    for block in text.split("\n\n") {
        let mut lines = block.lines().map(str::trim).filter(|l| !l.is_empty());
        let Some(first) = lines.next() else { continue };
        let timing = if first.contains("-->") {
            first
        } else {
            match lines.next() {
                Some(t) => t,
                None => continue,
            }
        };
        let (start, end) = timing.split_once("-->").ok_or_else(|| {
            Error::InvalidSubtitle(format!("{show_id}: bad timing line {timing:?}"))
        })?;
        let start = srt_time(start.trim(), show_id)?;
        let end = srt_time(end.split_whitespace().next().unwrap_or(""), show_id)?;
        let body = lines.map(strip_markup).collect::<Vec<_>>().join(" ");
        if body.trim().is_empty() {
            continue;
        }
        out.push(SubtitleLine::new(show_id, start, Some(end), body.trim())?);
    }
    Ok(out)
}

fn srt_time(s: &str, show_id: &str) -> Result<f64> {
    let bad = || Error::InvalidSubtitle(format!("{show_id}: bad timestamp {s:?}"));
    let (hms, ms) = s.split_once([',', '.']).ok_or_else(bad)?;
    let parts: Vec<&str> = hms.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let num = |p: &str| p.parse::<u32>().map_err(|_| bad());
    let (h, m, sec, ms) = (num(parts[0])?, num(parts[1])?, num(parts[2])?, num(ms)?);
    Ok(f64::from(h) * 3600.0 + f64::from(m) * 60.0 + f64::from(sec) + f64::from(ms) / 1000.0)
}

fn strip_markup(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_tag = false;
    for c in line.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

/// A run of subtitle sentences merged by time proximity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub show_id: String,
    /// Position of this document among the show's documents.
    pub index: usize,
    pub sentences: Vec<String>,
}

impl Document {
    pub fn origin_id(&self) -> String {
        format!("{}#{}", self.show_id, self.index)
    }
}

/// Time between two consecutive lines: end-to-start when the earlier line has
/// an end time, start-to-start otherwise.
pub fn line_gap(prev: &SubtitleLine, next: &SubtitleLine) -> f64 {
    next.start_s - prev.end_s.unwrap_or(prev.start_s)
}

/// Groups lines per show and splits each show wherever the gap exceeds
/// `gap_s` (a gap of exactly `gap_s` keeps merging).
///
/// Shows are returned in order of first appearance; lines of one show must be
/// sorted by start time but shows may interleave in the input.
pub fn merge_subtitles(lines: &[SubtitleLine], gap_s: f64) -> Result<Vec<Document>> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_show: HashMap<&str, Vec<&SubtitleLine>> = HashMap::new();
    for line in lines {
        by_show
            .entry(line.show_id.as_str())
            .or_insert_with(|| {
                order.push(line.show_id.as_str());
                Vec::new()
            })
            .push(line);
    }
    let shows: Vec<Vec<&SubtitleLine>> = order
        .iter()
        .map(|id| by_show.remove(id).unwrap_or_default())
        .collect();

    let merged = par::map_indexed(&shows, |_, show| merge_show(show, gap_s));
    let mut out = Vec::new();
    for docs in merged {
        out.extend(docs?);
    }
    Ok(out)
}

fn merge_show(lines: &[&SubtitleLine], gap_s: f64) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut prev: Option<&SubtitleLine> = None;
    for &line in lines {
        let start_new = match prev {
            None => true,
            Some(p) => {
                if line.start_s < p.start_s {
                    return Err(Error::Unsorted {
                        show_id: line.show_id.clone(),
                        prev: p.start_s,
                        next: line.start_s,
                    });
                }
                line_gap(p, line) > gap_s
            }
        };
        if start_new {
            docs.push(Document {
                show_id: line.show_id.clone(),
                index: docs.len(),
                sentences: Vec::new(),
            });
        }
        docs.last_mut()
            .expect("a document was just opened")
            .sentences
            .push(line.text.trim().to_string());
        prev = Some(line);
    }
    Ok(docs)
}

/// Cuts a document into overlapping windows of `n` sentences.
///
/// A document of `L < n` sentences yields nothing; otherwise `L - n + 1`
/// windows starting at offsets `0..=L-n`.
///
/// # Panics
///
/// If `n == 0`.
pub fn window_documents(origin_id: &str, sentences: &[String], n: usize) -> Vec<MonoWindow> {
    assert!(n >= 1, "window size must be at least 1");
    sentences
        .windows(n)
        .enumerate()
        .map(|(start, w)| {
            MonoWindow::new(origin_id, start, w.to_vec())
                .expect("merged subtitle sentences are non-empty")
        })
        .collect()
}

/// Strips every whitespace character; case is preserved.
pub fn normalize(sentence: &str) -> String {
    sentence.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Normalised evaluation sentences that must not appear in training windows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    banned: HashSet<String>,
}

impl FilterIndex {
    pub fn insert(&mut self, sentence: &str) {
        let n = normalize(sentence);
        if !n.is_empty() {
            self.banned.insert(n);
        }
    }

    pub fn contains(&self, sentence: &str) -> bool {
        self.banned.contains(&normalize(sentence))
    }

    pub fn len(&self) -> usize {
        self.banned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banned.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.banned.iter().map(String::as_str)
    }
}

/// Indexes the final target sentence of every evaluation example and every
/// candidate of every challenge item. Context sentences are not indexed.
pub fn build_filter_index(examples: &[ContextualExample], challenges: &[ChallengeItem]) -> FilterIndex {
    let mut index = FilterIndex::default();
    for ex in examples {
        index.insert(ex.current().tgt());
    }
    for item in challenges {
        for cand in item.candidates() {
            index.insert(cand);
        }
    }
    index
}

/// Drops every window in which any sentence normalises to a banned string.
pub fn filter_windows(windows: Vec<MonoWindow>, index: &FilterIndex) -> Vec<MonoWindow> {
    if index.is_empty() {
        return windows;
    }
    par::filter(windows, |w| !w.sentences().iter().any(|s| index.contains(s)))
}

/// Counts from one monolingual extraction run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractStats {
    pub lines: usize,
    pub documents: usize,
    pub short_documents: usize,
    pub windows: usize,
    pub filtered: usize,
    pub kept: usize,
}

/// Merge, window and filter in one pass.
pub fn extract_windows(
    lines: &[SubtitleLine],
    gap_s: f64,
    n: usize,
    index: &FilterIndex,
) -> Result<(Vec<MonoWindow>, ExtractStats)> {
    let docs = merge_subtitles(lines, gap_s)?;
    let per_doc = par::map_indexed(&docs, |_, d| window_documents(&d.origin_id(), &d.sentences, n));
    let windows: Vec<MonoWindow> = per_doc.into_iter().flatten().collect();
    let total = windows.len();
    let kept = filter_windows(windows, index);
    let stats = ExtractStats {
        lines: lines.len(),
        documents: docs.len(),
        short_documents: docs.iter().filter(|d| d.sentences.len() < n).count(),
        windows: total,
        filtered: total - kept.len(),
        kept: kept.len(),
    };
    Ok((kept, stats))
}

/// Default window length for monolingual extraction.
pub const DEFAULT_WINDOW: usize = WINDOW_LEN;
