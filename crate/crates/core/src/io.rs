//! Dataset files.
//!
//! Sparse count file:
//!
//! ```text
//! N D NNZ
//! 1:2 3:1        <- row 1: column 1 has count 2, column 3 has count 1
//! 2:4            <- row 2
//! ```
//!
//! Columns are 1-based and each row line may be empty (an all-zero row).
//! A header with only `N D` selects the dense form instead: `N` lines of `D`
//! counts separated by commas or whitespace. Labels files hold one positive
//! integer per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::types::{CountDataset, CountVector};

fn parse_err(line: usize, msg: impl Into<String>) -> MmError {
    MmError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_uint<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| parse_err(line, format!("invalid {what} `{tok}`")))
}

/// Parses a sparse (`N D NNZ` header) or dense (`N D` header) count file.
pub fn parse_counts(text: &str) -> Result<CountDataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    match fields.len() {
        3 => parse_sparse_body(&fields, lines),
        2 => parse_dense_body(&fields, lines),
        _ => Err(parse_err(
            1,
            format!("header must be `N D NNZ` or `N D`, got `{header}`"),
        )),
    }
}

/// Alias of [`parse_counts`] for files known to be sparse.
pub fn parse_sparse_counts(text: &str) -> Result<CountDataset> {
    parse_counts(text)
}

fn header_dims(fields: &[&str]) -> Result<(usize, usize)> {
    let n: usize = parse_uint(fields[0], 1, "N")?;
    let d: usize = parse_uint(fields[1], 1, "D")?;
    if n == 0 {
        return Err(parse_err(1, "N must be >= 1"));
    }
    if d == 0 {
        return Err(parse_err(1, "D must be >= 1"));
    }
    if d > u32::MAX as usize {
        return Err(parse_err(1, format!("D={d} is too large")));
    }
    Ok((n, d))
}

/// Checks that no non-blank lines follow the last row.
fn check_trailing<'a>(mut lines: impl Iterator<Item = &'a str>, n: usize) -> Result<()> {
    if let Some((extra, _)) = lines.by_ref().enumerate().find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(
            n + 2 + extra,
            format!("unexpected content after {n} rows"),
        ));
    }
    Ok(())
}

fn parse_sparse_body<'a>(
    fields: &[&str],
    mut lines: impl Iterator<Item = &'a str>,
) -> Result<CountDataset> {
    let (n, d) = header_dims(fields)?;
    let nnz: usize = parse_uint(fields[2], 1, "NNZ")?;
    // Header values are untrusted; cap up-front allocation.
    let mut rows = Vec::with_capacity(n.min(1 << 16));
    let mut seen = 0usize;
    for i in 0..n {
        let lineno = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(lineno, format!("expected {n} rows, found {i}")))?;
        let mut pairs = Vec::new();
        for tok in line.split_whitespace() {
            let (col, count) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected `column:count`, got `{tok}`")))?;
            let col: usize = parse_uint(col, lineno, "column index")?;
            let count: u32 = parse_uint(count, lineno, "count")?;
            if col == 0 || col > d {
                return Err(parse_err(
                    lineno,
                    format!("column index {col} out of range 1..={d}"),
                ));
            }
            if count == 0 {
                return Err(parse_err(lineno, format!("zero count for column {col}")));
            }
            pairs.push(((col - 1) as u32, count));
        }
        seen += pairs.len();
        let row = CountVector::from_sparse(d, pairs).map_err(|e| parse_err(lineno, e.to_string()))?;
        rows.push(row);
    }
    check_trailing(lines, n)?;
    if seen != nnz {
        return Err(parse_err(
            1,
            format!("header declares NNZ={nnz} but rows contain {seen} entries"),
        ));
    }
    CountDataset::new(rows)
}

fn parse_dense_body<'a>(
    fields: &[&str],
    mut lines: impl Iterator<Item = &'a str>,
) -> Result<CountDataset> {
    let (n, d) = header_dims(fields)?;
    let mut rows = Vec::with_capacity(n.min(1 << 16));
    let mut counts = Vec::new();
    for i in 0..n {
        let lineno = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(lineno, format!("expected {n} rows, found {i}")))?;
        counts.clear();
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            if counts.len() == d {
                return Err(parse_err(lineno, format!("more than D={d} values")));
            }
            counts.push(parse_uint::<u32>(tok, lineno, "count")?);
        }
        if counts.len() != d {
            return Err(parse_err(
                lineno,
                format!("expected D={d} values, found {}", counts.len()),
            ));
        }
        rows.push(CountVector::from_dense(&counts)?);
    }
    check_trailing(lines, n)?;
    CountDataset::new(rows)
}

pub fn load_sparse_counts(path: impl AsRef<Path>) -> Result<CountDataset> {
    parse_counts(&read(path.as_ref())?)
}

pub fn write_sparse_counts(data: &CountDataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", data.n(), data.dim(), data.nnz());
    for row in data.rows() {
        let mut first = true;
        for &(d, c) in row.nonzeros() {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{}:{}", d + 1, c);
        }
        out.push('\n');
    }
    out
}

pub fn save_sparse_counts(data: &CountDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_sparse_counts(data)).map_err(|source| MmError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Parses one positive integer per line. Blank trailing lines are ignored.
pub fn parse_labels(text: &str, expected: Option<usize>) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    for (i, line) in lines.iter().enumerate() {
        let tok = line.trim();
        let v: usize = parse_uint(tok, i + 1, "label")?;
        if v == 0 {
            return Err(parse_err(i + 1, "labels must be positive"));
        }
        labels.push(v);
    }
    if let Some(n) = expected {
        if labels.len() != n {
            return Err(parse_err(
                labels.len() + 1,
                format!("expected {n} labels, found {}", labels.len()),
            ));
        }
    }
    Ok(labels)
}

pub fn load_labels(path: impl AsRef<Path>, expected: Option<usize>) -> Result<Vec<usize>> {
    parse_labels(&read(path.as_ref())?, expected)
}

pub fn write_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| MmError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a counts file and, when given, its labels file.
pub fn load_dataset(
    counts: impl AsRef<Path>,
    labels: Option<impl AsRef<Path>>,
) -> Result<CountDataset> {
    let data = load_sparse_counts(counts)?;
    match labels {
        Some(p) => {
            let labels = load_labels(p, Some(data.n()))?;
            data.with_labels(labels)
        }
        None => Ok(data),
    }
}

/// Shape summary of a count dataset, written next to it as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub nnz: usize,
    /// Number of ground-truth clusters, when known.
    pub k: Option<usize>,
    pub version: String,
    /// Generator settings for synthetic data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<crate::synth::SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_skld: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<usize>,
}

impl DatasetManifest {
    pub fn describe(name: &str, data: &CountDataset, k: Option<usize>) -> Self {
        let k = k.or_else(|| {
            data.labels().map(|l| {
                let mut v = l.to_vec();
                v.sort_unstable();
                v.dedup();
                v.len()
            })
        });
        Self {
            name: name.to_string(),
            n: data.n(),
            d: data.dim(),
            nnz: data.nnz(),
            k,
            version: crate::VERSION.to_string(),
            synthetic: None,
            orders: None,
            min_skld: None,
            attempts: None,
        }
    }

    pub fn for_synthetic(name: &str, synth: &crate::synth::SyntheticData) -> Self {
        let mut m = Self::describe(name, &synth.dataset, Some(synth.spec.k));
        m.synthetic = Some(synth.spec.clone());
        m.orders = Some(synth.generating.orders.clone());
        m.min_skld = synth
            .generating
            .min_skld
            .is_finite()
            .then_some(synth.generating.min_skld);
        m.attempts = Some(synth.generating.attempts);
        m
    }
}

/// Shape of a well-known document-term corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusShape {
    pub name: &'static str,
    pub n: usize,
    pub d: usize,
    pub k: usize,
}

/// Document-term corpora commonly used to benchmark multinomial mixtures.
pub const KNOWN_CORPORA: [CorpusShape; 8] = [
    CorpusShape { name: "ng20", n: 19949, d: 43586, k: 20 },
    CorpusShape { name: "classic", n: 7094, d: 41681, k: 4 },
    CorpusShape { name: "ohscal", n: 11162, d: 11465, k: 10 },
    CorpusShape { name: "k1b", n: 2340, d: 21839, k: 6 },
    CorpusShape { name: "hitech", n: 2310, d: 10080, k: 6 },
    CorpusShape { name: "reviews", n: 4069, d: 18483, k: 5 },
    CorpusShape { name: "sports", n: 8580, d: 14870, k: 7 },
    CorpusShape { name: "la12", n: 6279, d: 31472, k: 6 },
];

pub fn known_corpus(name: &str) -> Option<CorpusShape> {
    KNOWN_CORPORA
        .iter()
        .copied()
        .find(|c| c.name.eq_ignore_ascii_case(name))
}
