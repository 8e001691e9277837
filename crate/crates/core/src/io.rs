//! File interchange: Matrix Market views, TSV matrices, embeddings,
//! word-similarity tasks, JSON manifests and JSON-lines diagnostics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::solver::IterateDiagnostics;

/// Shortest representation that parses back to the same `f64` (at most 17
/// significant digits); exponent form outside `[1e-5, 1e16)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Numbered lines with trailing `\r` removed.
fn lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let owned = path.to_path_buf();
    Ok(open(path)?.lines().enumerate().map(move |(i, l)| {
        l.map(|mut s| {
            if s.ends_with('\r') {
                s.pop();
            }
            (i + 1, s)
        })
        .map_err(|e| Error::io(&owned, e))
    }))
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} '{tok}'")))
}

/// Reads a `coordinate real general` Matrix Market file (1-based indices,
/// duplicates summed). `integer` fields are accepted as reals.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let mut it = lines(path)?;
    let (_, header) = it.next().transpose()?.ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix coordinate real general' header"));
    }
    if fields[2] != "coordinate" || !(fields[3] == "real" || fields[3] == "integer") || fields[4] != "general" {
        return Err(parse_err(
            path,
            1,
            format!("unsupported format '{} {} {}'", fields[2], fields[3], fields[4]),
        ));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut last_line = 1;
    for item in it {
        let (no, line) = item?;
        last_line = no;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if toks.len() != 3 {
                    return Err(parse_err(path, no, "size line must be 'rows cols entries'"));
                }
                let r = parse_num(path, no, toks[0], "row count")?;
                let c = parse_num(path, no, toks[1], "column count")?;
                let n = parse_num(path, no, toks[2], "entry count")?;
                triplets.reserve(n);
                size = Some((r, c, n));
            }
            Some((rows, cols, n)) => {
                if toks.len() != 3 {
                    return Err(parse_err(path, no, "entry must be 'row col value'"));
                }
                if triplets.len() == n {
                    return Err(parse_err(path, no, format!("more than the declared {n} entries")));
                }
                let i: usize = parse_num(path, no, toks[0], "row index")?;
                let j: usize = parse_num(path, no, toks[1], "column index")?;
                let v: f64 = parse_num(path, no, toks[2], "value")?;
                if i == 0 || i > rows || j == 0 || j > cols {
                    return Err(parse_err(path, no, format!("index ({i}, {j}) outside {rows}x{cols}")));
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (rows, cols, n) = size.ok_or_else(|| parse_err(path, last_line, "missing size line"))?;
    if triplets.len() != n {
        return Err(parse_err(
            path,
            last_line,
            format!("declared {n} entries, found {}", triplets.len()),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io)?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), a.nnz()).map_err(io)?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {}", i + 1, j + 1, format_f64(v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per line, tab-separated.
pub fn write_dense_tsv(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for r in 0..a.rows() {
        let line: Vec<String> = a.row(r).iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", line.join("\t")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Inverse of [`write_dense_tsv`]; an empty file yields a `0 × 0` matrix.
pub fn read_dense_tsv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for item in lines(path)? {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split('\t') {
            data.push(parse_num::<f64>(path, no, tok.trim(), "number")?);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(path, no, format!("row has {width} fields, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    if rows == 0 {
        log::warn!("{}: empty matrix file", path.display());
    }
    DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)
}

/// Reads `word v_1 … v_K` lines. `K` is fixed by the first line; a repeated
/// word keeps its first position and takes the last vector.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(Vec<String>, DenseMatrix)> {
    let path = path.as_ref();
    let mut words: Vec<String> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut data: Vec<f64> = Vec::new();
    let mut dim: Option<usize> = None;
    for item in lines(path)? {
        let (no, line) = item?;
        let mut toks = line.split_whitespace();
        let Some(word) = toks.next() else { continue };
        let vec = toks
            .map(|t| parse_num::<f64>(path, no, t, "vector entry"))
            .collect::<Result<Vec<_>>>()?;
        let k = *dim.get_or_insert(vec.len());
        if k == 0 {
            return Err(parse_err(path, no, "embedding line has no vector entries"));
        }
        if vec.len() != k {
            return Err(parse_err(path, no, format!("expected {k} entries, found {}", vec.len())));
        }
        match index.get(word) {
            Some(&row) => {
                log::warn!("{}:{no}: duplicate word '{word}', keeping the last vector", path.display());
                data[row * k..(row + 1) * k].copy_from_slice(&vec);
            }
            None => {
                index.insert(word.to_string(), words.len());
                words.push(word.to_string());
                data.extend_from_slice(&vec);
            }
        }
    }
    let k = dim.unwrap_or(0);
    let m = DenseMatrix::from_vec(words.len(), k, data)?;
    Ok((words, m))
}

pub fn write_embeddings(path: impl AsRef<Path>, words: &[String], vectors: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    if words.len() != vectors.rows() {
        return Err(Error::shape("write_embeddings", format!("{} rows", words.len()), format!("{} rows", vectors.rows())));
    }
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for (r, word) in words.iter().enumerate() {
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::Parameter(format!("word {r} is empty or contains whitespace")));
        }
        write!(w, "{word}").map_err(io)?;
        for &v in vectors.row(r) {
            write!(w, " {}", format_f64(v)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

/// Reads `word1 word2 score` triples; blank lines are skipped, case is kept.
pub fn read_wordsim_task(path: impl AsRef<Path>) -> Result<Vec<SimilarityPair>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for item in lines(path)? {
        let (no, line) = item?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            [a, b, s] => out.push(SimilarityPair {
                word1: a.to_string(),
                word2: b.to_string(),
                score: parse_num(path, no, s, "score")?,
            }),
            _ => return Err(parse_err(path, no, format!("expected 'word1 word2 score', found {} fields", toks.len()))),
        }
    }
    Ok(out)
}

/// Run record written next to every output. File paths are relative to the
/// manifest's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub view_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_cols: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_cols: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realized_density: Vec<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub results: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn resolve(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let dir = manifest_path.parent().unwrap_or(Path::new(""));
        self.view_files.iter().map(|p| dir.join(p)).collect()
    }
}

/// Writes pretty-printed JSON after checking every listed view file exists.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    for p in manifest.resolve(path) {
        if !p.exists() {
            return Err(Error::Parameter(format!("manifest lists missing file {}", p.display())));
        }
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, manifest)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    serde_json::from_reader(open(path)?).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

/// Appends one JSON object per outer iteration.
pub struct DiagnosticsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let out = create(&path)?;
        Ok(DiagnosticsWriter { path, out })
    }

    pub fn write(&mut self, d: &IterateDiagnostics) -> Result<()> {
        serde_json::to_writer(&mut self.out, d)?;
        writeln!(self.out).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_diagnostics(path: impl AsRef<Path>) -> Result<Vec<IterateDiagnostics>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for item in lines(path)? {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(path, no, e.to_string()))?);
    }
    Ok(out)
}
