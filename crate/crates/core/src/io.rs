//! File formats: the SDPA sparse text format, a native JSON problem format
//! and the JSON result record.
//!
//! JSON problem layout (all indices 0-based; `i <= j` within PSD blocks,
//! `i = j` within linear blocks):
//!
//! ```text
//! { "blocks": [{"kind": "s", "size": 3}, {"kind": "l", "size": 2}],
//!   "C": [[block, i, j, value], ...],
//!   "A": [[[block, i, j, value], ...], ...],   one list per row of A
//!   "b": [...],
//!   "B": [...], "l": [...], "u": [...],        optional, same row layout as A
//!   "L": [bound per block], "U": [bound per block] }
//! ```
//!
//! A bound is `null` (free), a number (broadcast) or an array with one raw
//! entry per block coordinate. Infinite numbers are written `"inf"`/`"-inf"`.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::linalg::{svec_pair, tri};
use crate::model::{Block, BlockKind, BlockStructure, BlockValue, BlockVars, Bound, ProblemData, SparseCols};
use crate::residuals::IterateState;
use crate::solver::SolveResult;

/// Largest total block dimension accepted from a file.
pub const MAX_DIM: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
    #[error("line {line}: {message}")]
    Sdpa { line: usize, message: String },
    #[error("{pointer}: {message}")]
    Json { pointer: String, message: String },
}

fn read_text(path: &Path) -> Result<String, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::Read { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|e| IoError::Write { path: path.display().to_string(), reason: e.to_string() })
}

/// How the SDPA objective matrix `F0` becomes `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum SdpaSign {
    /// SDPA maximizes `<F0, X>`; store `C = -F0` and minimize.
    #[default]
    Min,
    /// Keep `C = F0` as given.
    Max,
}

fn sdpa_err<T>(line: usize, message: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Sdpa { line, message: message.into() })
}

/// Tokenizer over non-comment lines; `{ } ( ) ,` count as whitespace.
struct SdpaLines<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> SdpaLines<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate().peekable(), last_line: 0 }
    }

    /// Next non-empty, non-comment line as `(line number, tokens)`.
    fn next_line(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (k, line) in self.lines.by_ref() {
            let t = line.trim_start();
            if t.starts_with('"') || t.starts_with('*') {
                continue;
            }
            let toks: Vec<&str> = t.split(|c: char| c.is_whitespace() || "{}(),".contains(c)).filter(|s| !s.is_empty()).collect();
            if toks.is_empty() {
                continue;
            }
            self.last_line = k + 1;
            return Some((k + 1, toks));
        }
        None
    }

    /// Reads `count` numbers that may span several lines.
    fn numbers<T: std::str::FromStr>(&mut self, count: usize, what: &str) -> Result<Vec<T>, IoError> {
        let mut out = Vec::new();
        while out.len() < count {
            let Some((line, toks)) = self.next_line() else {
                return sdpa_err(self.last_line, format!("unexpected end of file while reading {what}"));
            };
            for tok in toks {
                if out.len() == count {
                    return sdpa_err(line, format!("extra token `{tok}` after {what}"));
                }
                match parse_sdpa_number(tok) {
                    Some(v) => out.push(v),
                    None => return sdpa_err(line, format!("cannot parse `{tok}` in {what}")),
                }
            }
        }
        Ok(out)
    }
}

fn parse_sdpa_number<T: std::str::FromStr>(tok: &str) -> Option<T> {
    tok.parse::<T>().ok().or_else(|| tok.strip_prefix('+').and_then(|t| t.parse().ok()))
}

/// First token of a header line (SDPA headers may carry trailing text such
/// as `= mDIM`).
fn header_count(lines: &mut SdpaLines<'_>, what: &str) -> Result<(usize, i64), IoError> {
    let Some((line, toks)) = lines.next_line() else {
        return sdpa_err(lines.last_line, format!("missing {what}"));
    };
    match parse_sdpa_number::<i64>(toks[0]) {
        Some(v) if v >= 0 => Ok((line, v)),
        _ => sdpa_err(line, format!("cannot parse {what} from `{}`", toks[0])),
    }
}

/// Parses SDPA sparse text.
pub fn parse_sdpa(text: &str, sign: SdpaSign) -> Result<ProblemData, IoError> {
    let mut lines = SdpaLines::new(text);
    let (_, m) = header_count(&mut lines, "number of constraints")?;
    let (line_nb, nblocks) = header_count(&mut lines, "number of blocks")?;
    if nblocks == 0 {
        return sdpa_err(line_nb, "number of blocks must be positive");
    }
    let sizes: Vec<i64> = lines.numbers(nblocks as usize, "block sizes")?;
    let size_line = lines.last_line;
    let mut blocks = Vec::with_capacity(sizes.len());
    let mut dim = 0usize;
    for &s in &sizes {
        let n = s.unsigned_abs() as usize;
        if n == 0 {
            return sdpa_err(size_line, "block size 0");
        }
        let d = if s > 0 { if n > 20_000 { usize::MAX } else { tri(n) } } else { n };
        dim = dim.saturating_add(d);
        if dim > MAX_DIM {
            return sdpa_err(size_line, "problem too large");
        }
        blocks.push(if s > 0 { Block::psd(n) } else { Block::linear(n) });
    }
    let m = m as usize;
    let b: Vec<f64> = lines.numbers(m, "right-hand side")?;
    let blk = BlockStructure::new(blocks).map_err(|e| IoError::Sdpa { line: size_line, message: e.to_string() })?;
    let mut c = vec![0.0; dim];
    let mut trip = Vec::new();
    let csign = match sign {
        SdpaSign::Min => -1.0,
        SdpaSign::Max => 1.0,
    };
    while let Some((line, toks)) = lines.next_line() {
        if toks.len() != 5 {
            return sdpa_err(line, format!("expected `matno blkno i j value`, found {} tokens", toks.len()));
        }
        let idx = |k: usize| parse_sdpa_number::<usize>(toks[k]).ok_or(());
        let (Ok(matno), Ok(blkno), Ok(i), Ok(j)) = (idx(0), idx(1), idx(2), idx(3)) else {
            return sdpa_err(line, "indices must be nonnegative integers");
        };
        let Some(value) = parse_sdpa_number::<f64>(toks[4]) else {
            return sdpa_err(line, format!("cannot parse value `{}`", toks[4]));
        };
        if !value.is_finite() {
            return sdpa_err(line, "non-finite value");
        }
        if matno > m {
            return sdpa_err(line, format!("matrix number {matno} exceeds {m}"));
        }
        if blkno == 0 || blkno > blk.len() {
            return sdpa_err(line, format!("block number {blkno} outside 1..={}", blk.len()));
        }
        if i == 0 || j == 0 {
            return sdpa_err(line, "entry indices are 1-based");
        }
        if i > j {
            return sdpa_err(line, format!("entry ({i}, {j}) is below the diagonal"));
        }
        let t = blk.coord(blkno - 1, i - 1, j - 1).map_err(|e| IoError::Sdpa { line, message: e.to_string() })?;
        if matno == 0 {
            c[t] += csign * value;
        } else {
            trip.push((t, matno - 1, value));
        }
    }
    let at = SparseCols::from_triplets(dim, m, trip).map_err(|e| IoError::Sdpa { line: lines.last_line, message: e.to_string() })?;
    Ok(ProblemData::new(blk, at, c, b))
}

pub fn read_sdpa(path: &Path, sign: SdpaSign) -> Result<ProblemData, IoError> {
    parse_sdpa(&read_text(path)?, sign)
}

/// SDPA text for a bound-free problem without inequality rows.
pub fn to_sdpa(data: &ProblemData, sign: SdpaSign) -> Result<String, IoError> {
    if data.p() > 0 || data.has_bounds() {
        return Err(IoError::Write { path: String::new(), reason: "SDPA holds neither inequality rows nor bounds".into() });
    }
    let mut out = String::new();
    let _ = writeln!(out, "{}", data.m());
    let _ = writeln!(out, "{}", data.blk.len());
    let sizes: Vec<String> = data
        .blk
        .blocks()
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => b.size.to_string(),
            BlockKind::Linear => format!("-{}", b.size),
        })
        .collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let b: Vec<String> = data.b.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    let csign = match sign {
        SdpaSign::Min => -1.0,
        SdpaSign::Max => 1.0,
    };
    let entry = |out: &mut String, matno: usize, t: usize, v: f64| {
        let (j, i, jj) = locate(&data.blk, t);
        let _ = writeln!(out, "{} {} {} {} {:e}", matno, j + 1, i + 1, jj + 1, v);
    };
    for (t, &v) in data.c.iter().enumerate() {
        if v != 0.0 {
            entry(&mut out, 0, t, csign * v);
        }
    }
    for k in 0..data.m() {
        for (t, v) in data.at.col(k) {
            entry(&mut out, k + 1, t, v);
        }
    }
    Ok(out)
}

/// `(block, i, j)` of a flat coordinate, `i <= j`.
fn locate(blk: &BlockStructure, t: usize) -> (usize, usize, usize) {
    let j = (0..blk.len()).find(|&j| blk.range(j).contains(&t)).expect("coordinate inside the layout");
    let local = t - blk.range(j).start;
    match blk.block(j).kind {
        BlockKind::Psd => {
            let (i, jj) = svec_pair(local);
            (j, i, jj)
        }
        BlockKind::Linear => (j, local, local),
    }
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else if v < 0.0 {
        json!("-inf")
    } else {
        json!("nan")
    }
}

fn entries(blk: &BlockStructure, items: impl Iterator<Item = (usize, f64)>) -> Value {
    Value::Array(
        items
            .map(|(t, v)| {
                let (j, i, jj) = locate(blk, t);
                json!([j, i, jj, num(v)])
            })
            .collect(),
    )
}

fn rows_json(blk: &BlockStructure, op: &SparseCols) -> Value {
    Value::Array((0..op.ncols()).map(|k| entries(blk, op.col(k))).collect())
}

fn bound_json(b: &Bound) -> Value {
    match b {
        Bound::Free => Value::Null,
        Bound::Scalar(v) => num(*v),
        Bound::Dense(v) => Value::Array(v.iter().map(|&x| num(x)).collect()),
    }
}

/// The native JSON value of a problem.
pub fn problem_to_json(data: &ProblemData) -> Value {
    let blocks: Vec<Value> = data
        .blk
        .blocks()
        .iter()
        .map(|b| json!({"kind": if b.kind == BlockKind::Psd { "s" } else { "l" }, "size": b.size}))
        .collect();
    let mut obj = Map::new();
    obj.insert("blocks".into(), Value::Array(blocks));
    obj.insert("C".into(), entries(&data.blk, data.c.iter().copied().enumerate().filter(|(_, v)| *v != 0.0)));
    obj.insert("A".into(), rows_json(&data.blk, &data.at));
    obj.insert("b".into(), Value::Array(data.b.iter().map(|&v| num(v)).collect()));
    if data.p() > 0 {
        obj.insert("B".into(), rows_json(&data.blk, &data.bt));
        obj.insert("l".into(), Value::Array(data.l.iter().map(|&v| num(v)).collect()));
        obj.insert("u".into(), Value::Array(data.u.iter().map(|&v| num(v)).collect()));
    }
    if data.lower.iter().any(|b| *b != Bound::Free) {
        obj.insert("L".into(), Value::Array(data.lower.iter().map(bound_json).collect()));
    }
    if data.upper.iter().any(|b| *b != Bound::Free) {
        obj.insert("U".into(), Value::Array(data.upper.iter().map(bound_json).collect()));
    }
    Value::Object(obj)
}

pub fn write_json(data: &ProblemData, path: &Path) -> Result<(), IoError> {
    write_text(path, &problem_to_json_string(data))
}

pub fn problem_to_json_string(data: &ProblemData) -> String {
    let mut s = serde_json::to_string_pretty(&problem_to_json(data)).expect("JSON values serialize");
    s.push('\n');
    s
}

fn jerr<T>(pointer: &str, message: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Json { pointer: if pointer.is_empty() { "/".into() } else { pointer.into() }, message: message.into() })
}

fn get_f64(v: &Value, ptr: &str) -> Result<f64, IoError> {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| jerr(ptr, "number out of range"), Ok),
        Value::String(s) => match s.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => jerr(ptr, format!("expected a number or \"inf\"/\"-inf\", found \"{s}\"")),
        },
        _ => jerr(ptr, "expected a number"),
    }
}

fn get_index(v: &Value, ptr: &str) -> Result<usize, IoError> {
    v.as_u64().and_then(|x| usize::try_from(x).ok()).map_or_else(|| jerr(ptr, "expected a nonnegative integer"), Ok)
}

fn get_array<'v>(v: &'v Value, ptr: &str) -> Result<&'v Vec<Value>, IoError> {
    v.as_array().map_or_else(|| jerr(ptr, "expected an array"), Ok)
}

fn vector(v: &Value, ptr: &str, finite: bool) -> Result<Vec<f64>, IoError> {
    let arr = get_array(v, ptr)?;
    let mut out = Vec::with_capacity(arr.len());
    for (k, x) in arr.iter().enumerate() {
        let p = format!("{ptr}/{k}");
        let val = get_f64(x, &p)?;
        if finite && !val.is_finite() {
            return jerr(&p, "must be finite");
        }
        out.push(val);
    }
    Ok(out)
}

/// One `[block, i, j, value]` entry as a flat coordinate.
fn entry(blk: &BlockStructure, v: &Value, ptr: &str) -> Result<(usize, f64), IoError> {
    let arr = get_array(v, ptr)?;
    if arr.len() != 4 {
        return jerr(ptr, "expected [block, i, j, value]");
    }
    let block = get_index(&arr[0], &format!("{ptr}/0"))?;
    let i = get_index(&arr[1], &format!("{ptr}/1"))?;
    let j = get_index(&arr[2], &format!("{ptr}/2"))?;
    let value = get_f64(&arr[3], &format!("{ptr}/3"))?;
    if !value.is_finite() {
        return jerr(&format!("{ptr}/3"), "must be finite");
    }
    if i > j {
        return jerr(ptr, format!("entry ({i}, {j}) is below the diagonal"));
    }
    let t = blk.coord(block, i, j).map_err(|e| IoError::Json { pointer: ptr.into(), message: e.to_string() })?;
    Ok((t, value))
}

fn rows(blk: &BlockStructure, v: &Value, ptr: &str) -> Result<SparseCols, IoError> {
    let arr = get_array(v, ptr)?;
    let mut trip = Vec::new();
    for (k, row) in arr.iter().enumerate() {
        let rp = format!("{ptr}/{k}");
        for (e, item) in get_array(row, &rp)?.iter().enumerate() {
            let (t, val) = entry(blk, item, &format!("{rp}/{e}"))?;
            trip.push((t, k, val));
        }
    }
    SparseCols::from_triplets(blk.dim(), arr.len(), trip).map_err(|e| IoError::Json { pointer: ptr.into(), message: e.to_string() })
}

fn bounds(blk: &BlockStructure, v: Option<&Value>, ptr: &str) -> Result<Vec<Bound>, IoError> {
    let Some(v) = v else {
        return Ok(vec![Bound::Free; blk.len()]);
    };
    let arr = get_array(v, ptr)?;
    if arr.len() != blk.len() {
        return jerr(ptr, format!("expected one bound per block ({}), found {}", blk.len(), arr.len()));
    }
    let mut out = Vec::with_capacity(arr.len());
    for (j, b) in arr.iter().enumerate() {
        let p = format!("{ptr}/{j}");
        out.push(match b {
            Value::Null => Bound::Free,
            Value::Array(_) => {
                let vals = vector(b, &p, false)?;
                if vals.len() != blk.block(j).dim() {
                    return jerr(&p, format!("expected {} entries, found {}", blk.block(j).dim(), vals.len()));
                }
                Bound::Dense(vals)
            }
            other => Bound::Scalar(get_f64(other, &p)?),
        });
    }
    Ok(out)
}

/// Parses the native JSON problem format.
pub fn parse_json(text: &str) -> Result<ProblemData, IoError> {
    let root: Value = serde_json::from_str(text).map_err(|e| IoError::Json { pointer: "/".into(), message: e.to_string() })?;
    let obj = root.as_object().map_or_else(|| jerr("", "expected an object"), Ok)?;
    let field = |name: &str| obj.get(name).map_or_else(|| jerr("", format!("missing key \"{name}\"")), Ok);
    let mut blocks = Vec::new();
    let mut dim = 0usize;
    for (j, b) in get_array(field("blocks")?, "/blocks")?.iter().enumerate() {
        let p = format!("/blocks/{j}");
        let kind = b.get("kind").and_then(Value::as_str);
        let size = get_index(b.get("size").unwrap_or(&Value::Null), &format!("{p}/size"))?;
        if size == 0 {
            return jerr(&format!("{p}/size"), "must be positive");
        }
        let block = match kind {
            Some("s") => Block::psd(size),
            Some("l") => Block::linear(size),
            _ => return jerr(&format!("{p}/kind"), "expected \"s\" or \"l\""),
        };
        dim = dim.saturating_add(if block.kind == BlockKind::Psd && size > 20_000 { usize::MAX } else { block.dim() });
        if dim > MAX_DIM {
            return jerr(&p, "problem too large");
        }
        blocks.push(block);
    }
    let blk = BlockStructure::new(blocks).map_err(|e| IoError::Json { pointer: "/blocks".into(), message: e.to_string() })?;
    let mut c = vec![0.0; blk.dim()];
    for (e, item) in get_array(field("C")?, "/C")?.iter().enumerate() {
        let (t, v) = entry(&blk, item, &format!("/C/{e}"))?;
        c[t] += v;
    }
    let at = rows(&blk, field("A")?, "/A")?;
    let b = vector(field("b")?, "/b", true)?;
    if b.len() != at.ncols() {
        return jerr("/b", format!("expected {} entries (rows of A), found {}", at.ncols(), b.len()));
    }
    let mut data = ProblemData::new(blk.clone(), at, c, b);
    if let Some(bv) = obj.get("B") {
        let bt = rows(&blk, bv, "/B")?;
        let p = bt.ncols();
        let l = match obj.get("l") {
            Some(v) => vector(v, "/l", false)?,
            None => vec![f64::NEG_INFINITY; p],
        };
        let u = match obj.get("u") {
            Some(v) => vector(v, "/u", false)?,
            None => vec![f64::INFINITY; p],
        };
        if l.len() != p {
            return jerr("/l", format!("expected {p} entries, found {}", l.len()));
        }
        if u.len() != p {
            return jerr("/u", format!("expected {p} entries, found {}", u.len()));
        }
        data = data.with_inequalities(bt, l, u);
    } else if obj.contains_key("l") || obj.contains_key("u") {
        return jerr("/B", "\"l\"/\"u\" given without \"B\"");
    }
    let lower = bounds(&blk, obj.get("L"), "/L")?;
    let upper = bounds(&blk, obj.get("U"), "/U")?;
    Ok(data.with_bounds(lower, upper))
}

pub fn read_json(path: &Path) -> Result<ProblemData, IoError> {
    parse_json(&read_text(path)?)
}

fn block_values(blk: &BlockStructure, x: &BlockVars) -> Value {
    Value::Array(
        x.to_blocks(blk)
            .into_iter()
            .map(|b| match b {
                BlockValue::Matrix(m) => Value::Array(
                    (0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect())).collect(),
                ),
                BlockValue::Vector(v) => Value::Array(v.iter().map(|&x| num(x)).collect()),
            })
            .collect(),
    )
}

fn dvec(v: &nalgebra::DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

/// JSON record of a solve: objective values, diagnostics, the final
/// iterate (PSD blocks as full matrices) and the run history.
pub fn result_to_json(data: &ProblemData, res: &SolveResult, objective: Option<f64>) -> Value {
    let st: &IterateState = &res.state;
    let mut obj = Map::new();
    obj.insert("pobj".into(), num(res.pobj));
    obj.insert("dobj".into(), num(res.dobj));
    if let Some(o) = objective {
        obj.insert("objective".into(), num(o));
    }
    obj.insert("info".into(), serde_json::to_value(&res.info).expect("info serializes"));
    obj.insert(
        "state".into(),
        json!({
            "X": block_values(&data.blk, &st.x),
            "S": block_values(&data.blk, &st.dual_s),
            "Z": block_values(&data.blk, &st.z),
            "y": dvec(&st.y),
            "ybar": dvec(&st.ybar),
            "s": dvec(&st.s),
            "v": dvec(&st.v),
        }),
    );
    obj.insert("runhist".into(), serde_json::to_value(&res.runhist).expect("history serializes"));
    Value::Object(obj)
}

pub fn write_result(data: &ProblemData, res: &SolveResult, objective: Option<f64>, path: &Path) -> Result<(), IoError> {
    let mut s = serde_json::to_string_pretty(&result_to_json(data, res, objective)).expect("JSON values serialize");
    s.push('\n');
    write_text(path, &s)
}
