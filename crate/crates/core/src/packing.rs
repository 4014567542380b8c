//! Token sequences and fixed-shape batches.
//!
//! Sentence-level models use 64x128 rows with several sentences (each at most
//! 98 tokens) packed first-fit into a row. Context-aware models use 16x512
//! with one four-sentence example per row.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContextualExample, ReservedTokens};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const TAG_ID: u32 = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Src,
    Tgt,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "src" => Ok(Side::Src),
            "tgt" => Ok(Side::Tgt),
            _ => Err(Error::Config(format!("side must be src or tgt, got {s:?}"))),
        }
    }
}

/// Whitespace tokens of the example on one side, with the separator token
/// between consecutive sentences. Context-free examples yield just the
/// current sentence.
pub fn concat_example(ex: &ContextualExample, side: Side, tokens: &ReservedTokens) -> Vec<String> {
    let text = |p: &crate::model::SentencePair| match side {
        Side::Src => ex.render_src(p.src(), tokens),
        Side::Tgt => p.tgt().to_string(),
    };
    let mut out = Vec::new();
    if let Some(ctx) = ex.context() {
        for p in ctx {
            out.extend(text(p).split_whitespace().map(str::to_string));
            out.push(tokens.sep.clone());
        }
    }
    out.extend(text(ex.current()).split_whitespace().map(str::to_string));
    out
}

/// Token to id map. Ids 0..4 are pad, unknown, separator and tag.
#[derive(Debug, Clone)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocab {
    /// Only the reserved entries.
    pub fn new(reserved: &ReservedTokens) -> Self {
        let mut v = Self {
            ids: HashMap::new(),
            tokens: Vec::new(),
        };
        for t in [PAD_TOKEN, UNK_TOKEN, &reserved.sep, &reserved.tag] {
            v.push(t);
        }
        v
    }

    fn push(&mut self, token: &str) {
        if !self.ids.contains_key(token) {
            self.ids.insert(token.to_string(), self.tokens.len() as u32);
            self.tokens.push(token.to_string());
        }
    }

    /// Builds from token frequencies (descending, ties lexicographic), keeping
    /// at most `max_size` entries including the reserved ones.
    pub fn build<'a, I>(token_seqs: I, reserved: &ReservedTokens, max_size: Option<usize>) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for seq in token_seqs {
            for t in seq {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut v = Self::new(reserved);
        for (t, _) in ranked {
            if max_size.is_some_and(|m| v.len() >= m) {
                break;
            }
            v.push(t);
        }
        v
    }

    /// One token per line; reserved entries are always present first.
    pub fn from_reader<R: BufRead>(reader: R, reserved: &ReservedTokens) -> Result<Self> {
        let mut v = Self::new(reserved);
        for line in reader.lines() {
            let line = line?;
            let tok = line.trim();
            if !tok.is_empty() {
                v.push(tok);
            }
        }
        Ok(v)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// A rows x cols batch layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchGeometry {
    pub rows: usize,
    pub cols: usize,
    pub max_item_len: usize,
    pub packed: bool,
}

impl BatchGeometry {
    /// 64 x 128, several sentences of at most 98 tokens per row.
    pub const SENTENCE: Self = Self {
        rows: 64,
        cols: 128,
        max_item_len: 98,
        packed: true,
    };

    /// 16 x 512, one example of at most 512 tokens per row.
    pub const CONTEXT: Self = Self {
        rows: 16,
        cols: 512,
        max_item_len: 512,
        packed: false,
    };

    pub fn new(rows: usize, cols: usize, max_item_len: usize, packed: bool) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("geometry {rows}x{cols} must be non-empty")));
        }
        if max_item_len == 0 || max_item_len > cols {
            return Err(Error::Config(format!(
                "max item length {max_item_len} must be in 1..={cols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            max_item_len,
            packed,
        })
    }
}

/// A token sequence to place, with the id of the example it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackItem {
    pub id: String,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedBatch {
    pub grid: Vec<Vec<u32>>,
    pub spans: Vec<Vec<Span>>,
    /// Rows holding at least one item; the rest are padding.
    pub filled_rows: usize,
}

impl PackedBatch {
    fn empty(geom: &BatchGeometry) -> Self {
        Self {
            grid: vec![vec![PAD_ID; geom.cols]; geom.rows],
            spans: vec![Vec::new(); geom.rows],
            filled_rows: 0,
        }
    }

    fn used(&self, row: usize) -> usize {
        self.spans[row].last().map_or(0, |s| s.start + s.len)
    }

    fn place(&mut self, row: usize, item: &PackItem) {
        let start = self.used(row);
        if self.spans[row].is_empty() {
            self.filled_rows += 1;
        }
        self.grid[row][start..start + item.ids.len()].copy_from_slice(&item.ids);
        self.spans[row].push(Span {
            start,
            len: item.ids.len(),
            id: item.id.clone(),
        });
    }

    /// True when the final rows are padding-only.
    pub fn is_partial(&self) -> bool {
        self.filled_rows < self.grid.len()
    }

    /// Token ids of every span, in row order.
    pub fn items(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.spans.iter().enumerate().flat_map(move |(r, spans)| {
            spans
                .iter()
                .map(move |s| (s.id.as_str(), &self.grid[r][s.start..s.start + s.len]))
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PackStats {
    pub items_in: usize,
    pub items_packed: usize,
    pub dropped_too_long: usize,
    pub dropped_empty: usize,
    pub batches: usize,
    /// Mean occupied fraction over rows holding at least one item.
    pub mean_row_utilization: f64,
}

#[derive(Debug, Clone)]
pub struct PackOutcome {
    pub batches: Vec<PackedBatch>,
    pub stats: PackStats,
}

fn finish(batches: Vec<PackedBatch>, mut stats: PackStats, cols: usize) -> PackOutcome {
    let (mut used, mut rows) = (0usize, 0usize);
    for b in &batches {
        for r in 0..b.grid.len() {
            let u = b.used(r);
            if u > 0 {
                used += u;
                rows += 1;
            }
        }
    }
    stats.batches = batches.len();
    stats.mean_row_utilization = if rows == 0 {
        0.0
    } else {
        used as f64 / (rows * cols) as f64
    };
    PackOutcome { batches, stats }
}

fn admit(item: &PackItem, geom: &BatchGeometry, stats: &mut PackStats) -> bool {
    stats.items_in += 1;
    if item.ids.is_empty() {
        stats.dropped_empty += 1;
        false
    } else if item.ids.len() > geom.max_item_len {
        stats.dropped_too_long += 1;
        false
    } else {
        stats.items_packed += 1;
        true
    }
}

/// First-fit packing in arrival order.
///
/// Each item goes to the first row of the open batch with room for it; when
/// no row fits, the batch is emitted and a fresh one started. Items longer
/// than `max_item_len` are dropped and counted.
pub fn pack_rows(items: &[PackItem], geom: &BatchGeometry) -> Result<PackOutcome> {
    if !geom.packed {
        return Err(Error::Config("pack_rows needs a packed geometry".into()));
    }
    let mut stats = PackStats::default();
    let mut batches = Vec::new();
    let mut open: Option<PackedBatch> = None;
    for item in items {
        if !admit(item, geom, &mut stats) {
            continue;
        }
        let len = item.ids.len();
        let batch = open.get_or_insert_with(|| PackedBatch::empty(geom));
        let row = match (0..geom.rows).find(|&r| batch.used(r) + len <= geom.cols) {
            Some(r) => r,
            None => {
                batches.push(open.take().expect("open batch"));
                open = Some(PackedBatch::empty(geom));
                0
            }
        };
        open.as_mut().expect("open batch").place(row, item);
    }
    batches.extend(open);
    Ok(finish(batches, stats, geom.cols))
}

/// One item per row, `rows` items per batch; the last batch may be partial.
pub fn batch_context(items: &[PackItem], geom: &BatchGeometry) -> Result<PackOutcome> {
    if geom.packed {
        return Err(Error::Config("batch_context needs an unpacked geometry".into()));
    }
    let mut stats = PackStats::default();
    let mut batches = Vec::new();
    let mut open: Option<PackedBatch> = None;
    for item in items {
        if !admit(item, geom, &mut stats) {
            continue;
        }
        let batch = open.get_or_insert_with(|| PackedBatch::empty(geom));
        let row = batch.filled_rows;
        batch.place(row, item);
        if batch.filled_rows == geom.rows {
            batches.extend(open.take());
        }
    }
    batches.extend(open);
    Ok(finish(batches, stats, geom.cols))
}

/// Dispatches on `geom.packed`.
pub fn batch_items(items: &[PackItem], geom: &BatchGeometry) -> Result<PackOutcome> {
    if geom.packed {
        pack_rows(items, geom)
    } else {
        batch_context(items, geom)
    }
}

/// JSONL wire form: `{"grid": [[int]], "spans": [[[start, len, "id"], ..] per row], "filled_rows": n}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct BatchRecord {
    pub grid: Vec<Vec<u32>>,
    pub spans: Vec<Vec<(usize, usize, String)>>,
    pub filled_rows: usize,
}

impl From<&PackedBatch> for BatchRecord {
    fn from(b: &PackedBatch) -> Self {
        Self {
            grid: b.grid.clone(),
            spans: b
                .spans
                .iter()
                .map(|row| row.iter().map(|s| (s.start, s.len, s.id.clone())).collect())
                .collect(),
            filled_rows: b.filled_rows,
        }
    }
}

impl From<BatchRecord> for PackedBatch {
    fn from(r: BatchRecord) -> Self {
        Self {
            grid: r.grid,
            spans: r
                .spans
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|(start, len, id)| Span { start, len, id })
                        .collect()
                })
                .collect(),
            filled_rows: r.filled_rows,
        }
    }
}

/// Binary record: little-endian `u32` payload length, then `rows`, `cols`,
/// `filled_rows`, the grid row-major, and per row a span count followed by
/// `(start, len, id_len, id bytes)` for each span. All integers are `u32`.
pub fn write_bin<W: Write>(mut w: W, batch: &PackedBatch) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    let put = |buf: &mut Vec<u8>, x: usize| -> Result<()> {
        let x = u32::try_from(x).map_err(|_| Error::Config(format!("{x} does not fit in u32")))?;
        buf.extend_from_slice(&x.to_le_bytes());
        Ok(())
    };
    let cols = batch.grid.first().map_or(0, Vec::len);
    put(&mut buf, batch.grid.len())?;
    put(&mut buf, cols)?;
    put(&mut buf, batch.filled_rows)?;
    for row in &batch.grid {
        for &t in row {
            buf.extend_from_slice(&t.to_le_bytes());
        }
    }
    for row in &batch.spans {
        put(&mut buf, row.len())?;
        for s in row {
            put(&mut buf, s.start)?;
            put(&mut buf, s.len)?;
            put(&mut buf, s.id.len())?;
            buf.extend_from_slice(s.id.as_bytes());
        }
    }
    let len = u32::try_from(buf.len()).map_err(|_| Error::Config("batch record too large".into()))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&buf)?;
    Ok(())
}

/// Reads records written by [`write_bin`] until EOF.
pub fn read_bin<R: Read>(mut r: R) -> Result<Vec<PackedBatch>> {
    let mut out = Vec::new();
    loop {
        let mut len = [0u8; 4];
        match r.read_exact(&mut len) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut payload)?;
        out.push(decode_bin(&payload)?);
    }
    Ok(out)
}

fn decode_bin(payload: &[u8]) -> Result<PackedBatch> {
    let mut pos = 0;
    let truncated = || Error::Config("truncated binary batch record".into());
    let next = |pos: &mut usize| -> Result<u32> {
        let bytes = payload.get(*pos..*pos + 4).ok_or_else(truncated)?;
        *pos += 4;
        Ok(u32::from_le_bytes(bytes.try_into().expect("4 bytes")))
    };
    let rows = next(&mut pos)? as usize;
    let cols = next(&mut pos)? as usize;
    let filled_rows = next(&mut pos)? as usize;
    let mut grid = Vec::with_capacity(rows);
    for _ in 0..rows {
        grid.push((0..cols).map(|_| next(&mut pos)).collect::<Result<Vec<_>>>()?);
    }
    let mut spans = Vec::with_capacity(rows);
    for _ in 0..rows {
        let n = next(&mut pos)?;
        let mut row = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let start = next(&mut pos)? as usize;
            let len = next(&mut pos)? as usize;
            let id_len = next(&mut pos)? as usize;
            let id = payload.get(pos..pos + id_len).ok_or_else(truncated)?;
            pos += id_len;
            let id = String::from_utf8(id.to_vec())
                .map_err(|_| Error::Config("span id is not UTF-8".into()))?;
            row.push(Span { start, len, id });
        }
        spans.push(row);
    }
    Ok(PackedBatch {
        grid,
        spans,
        filled_rows,
    })
}
