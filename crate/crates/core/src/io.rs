//! Flat binary and CSV serialization of ensemble snapshots and covariances.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! offset  0  b"CVL1"
//! offset  4  K  (u64)
//! offset 12  N  (u64)
//! offset 20  q  (u64)
//! offset 28  t  (f64)
//! offset 36  K*N*q f64 values, row-major (sample, block, component)
//! ```
//!
//! A `qN x qN` covariance is stored in the same layout with `K = qN`.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrator::EnsembleState;
use crate::lattice::BlockCovariance;

pub const MAGIC: &[u8; 4] = b"CVL1";
pub const HEADER_LEN: usize = 36;

/// Decoded contents of a binary or CSV snapshot, before any model-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_samples: usize,
    pub n_blocks: usize,
    pub block_dim: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_ensemble(ensemble: &EnsembleState) -> Self {
        Self {
            n_samples: ensemble.n_samples(),
            n_blocks: ensemble.n_blocks(),
            block_dim: ensemble.block_dim(),
            time: ensemble.time(),
            values: ensemble.as_slice().to_vec(),
        }
    }

    /// The layout stores no seeds, so samples are labelled `0..K`.
    pub fn into_ensemble(self) -> Result<EnsembleState> {
        let seeds = (0..self.n_samples as u64).collect();
        EnsembleState::new(
            self.values,
            self.n_samples,
            self.n_blocks,
            self.block_dim,
            self.time,
            seeds,
        )
    }

    /// Reads the snapshot as a `qN x qN` covariance (`K` must equal `qN`).
    pub fn into_covariance(self) -> Result<BlockCovariance> {
        let d = self.n_blocks * self.block_dim;
        if self.n_samples != d {
            return Err(Error::Decode(format!(
                "covariance needs K = qN = {d} rows, header has K = {}",
                self.n_samples
            )));
        }
        let m = DMatrix::from_row_slice(d, d, &self.values);
        BlockCovariance::new(m, self.n_blocks, self.block_dim)
            .map_err(|e| Error::Decode(e.to_string()))
    }
}

fn checked_len(k: u64, n: u64, q: u64) -> Result<usize> {
    k.checked_mul(n)
        .and_then(|v| v.checked_mul(q))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or_else(|| Error::Decode(format!("dimensions {k} x {n} x {q} overflow")))
}

pub fn encode_snapshot(s: &Snapshot) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.values.len());
    out.extend_from_slice(MAGIC);
    for v in [s.n_samples, s.n_blocks, s.block_dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&s.time.to_le_bytes());
    for v in &s.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Decode("bad magic, expected CVL1".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (k, n, q) = (word(4), word(12), word(20));
    let time = f64::from_bits(word(28));
    if k == 0 || n == 0 || q == 0 {
        return Err(Error::Decode(format!(
            "zero dimension in header: K={k} N={n} q={q}"
        )));
    }
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::Decode(format!("invalid time {time}")));
    }
    let len = checked_len(k, n, q)?;
    let body = &bytes[HEADER_LEN..];
    if len.checked_mul(8) != Some(body.len()) {
        return Err(Error::Decode(format!(
            "payload has {} bytes, header implies {len} values",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(p) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Decode(format!("non-finite value at index {p}")));
    }
    Ok(Snapshot {
        n_samples: k as usize,
        n_blocks: n as usize,
        block_dim: q as usize,
        time,
        values,
    })
}

pub fn encode_ensemble(ensemble: &EnsembleState) -> Vec<u8> {
    encode_snapshot(&Snapshot::from_ensemble(ensemble))
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<EnsembleState> {
    decode_snapshot(bytes)?.into_ensemble()
}

pub fn encode_covariance(c: &BlockCovariance, time: f64) -> Vec<u8> {
    let d = c.n_blocks() * c.block_dim();
    let values = (0..d)
        .flat_map(|r| (0..d).map(move |s| (r, s)))
        .map(|(r, s)| c.data()[(r, s)])
        .collect();
    encode_snapshot(&Snapshot {
        n_samples: d,
        n_blocks: c.n_blocks(),
        block_dim: c.block_dim(),
        time,
        values,
    })
}

pub fn decode_covariance(bytes: &[u8]) -> Result<BlockCovariance> {
    decode_snapshot(bytes)?.into_covariance()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Decode(e.to_string())
}

fn write_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// `sample,block,component,value` with `sample` 0-based and the others 1-based.
pub fn write_ensemble_csv<W: Write>(ensemble: &EnsembleState, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample", "block", "component", "value"])
        .map_err(write_err)?;
    for j in 0..ensemble.n_samples() {
        for i in 0..ensemble.n_blocks() {
            for m in 0..ensemble.block_dim() {
                w.write_record([
                    j.to_string(),
                    (i + 1).to_string(),
                    (m + 1).to_string(),
                    ensemble.value(j, i, m).to_string(),
                ])
                .map_err(write_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    line: u64,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Decode(format!("line {line}: missing column {}", idx + 1)))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::Decode(format!("line {line}: cannot parse `{raw}`")))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Decode(format!(
            "expected header {}, got {}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn finite(v: f64, line: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Decode(format!("line {line}: non-finite value")))
    }
}

/// Reads a dense ensemble CSV in any row order; every `(sample, block,
/// component)` triple must appear exactly once. CSV carries no time, so the
/// caller supplies it.
pub fn read_ensemble_csv<R: Read>(input: R, time: f64) -> Result<Snapshot> {
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::contract(format!("invalid time {time}")));
    }
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &["sample", "block", "component", "value"])?;
    let mut entries = Vec::new();
    let (mut k, mut n, mut q) = (0usize, 0usize, 0usize);
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = idx as u64 + 2;
        if rec.len() != 4 {
            return Err(Error::Decode(format!("line {line}: expected 4 columns")));
        }
        let j: usize = parse_field(&rec, 0, line)?;
        let i: usize = parse_field(&rec, 1, line)?;
        let m: usize = parse_field(&rec, 2, line)?;
        let v = finite(parse_field(&rec, 3, line)?, line)?;
        if i == 0 || m == 0 {
            return Err(Error::Decode(format!(
                "line {line}: block and component are 1-based"
            )));
        }
        k = k.max(j.saturating_add(1));
        n = n.max(i);
        q = q.max(m);
        entries.push((j, i - 1, m - 1, v));
    }
    if entries.is_empty() {
        return Err(Error::Decode("no data rows".into()));
    }
    let len = checked_len(k as u64, n as u64, q as u64)?;
    if len != entries.len() {
        return Err(Error::Decode(format!(
            "{} rows do not fill a dense {k} x {n} x {q} ensemble",
            entries.len()
        )));
    }
    let mut values = vec![f64::NAN; len];
    let mut seen = vec![false; len];
    for (j, i, m, v) in entries {
        let at = (j * n + i) * q + m;
        if std::mem::replace(&mut seen[at], true) {
            return Err(Error::Decode(format!(
                "duplicate entry sample={j} block={} component={}",
                i + 1,
                m + 1
            )));
        }
        values[at] = v;
    }
    Ok(Snapshot {
        n_samples: k,
        n_blocks: n,
        block_dim: q,
        time,
        values,
    })
}

/// `row,col,value`, 1-based, every entry of the matrix.
pub fn write_covariance_csv<W: Write>(c: &BlockCovariance, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row", "col", "value"]).map_err(write_err)?;
    let d = c.data().nrows();
    for r in 0..d {
        for s in 0..d {
            w.write_record([
                (r + 1).to_string(),
                (s + 1).to_string(),
                c.data()[(r, s)].to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dense square matrix from `row,col,value` CSV in any row order.
pub fn read_matrix_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &["row", "col", "value"])?;
    let mut entries = Vec::new();
    let mut d = 0usize;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = idx as u64 + 2;
        if rec.len() != 3 {
            return Err(Error::Decode(format!("line {line}: expected 3 columns")));
        }
        let r: usize = parse_field(&rec, 0, line)?;
        let s: usize = parse_field(&rec, 1, line)?;
        let v = finite(parse_field(&rec, 2, line)?, line)?;
        if r == 0 || s == 0 {
            return Err(Error::Decode(format!("line {line}: indices are 1-based")));
        }
        d = d.max(r).max(s);
        entries.push((r - 1, s - 1, v));
    }
    if entries.is_empty() {
        return Err(Error::Decode("no data rows".into()));
    }
    if d.checked_mul(d) != Some(entries.len()) {
        return Err(Error::Decode(format!(
            "{} rows do not fill a dense {d} x {d} matrix",
            entries.len()
        )));
    }
    let mut m = DMatrix::from_element(d, d, f64::NAN);
    let mut seen = vec![false; d * d];
    for (r, s, v) in entries {
        if std::mem::replace(&mut seen[r * d + s], true) {
            return Err(Error::Decode(format!(
                "duplicate entry ({}, {})",
                r + 1,
                s + 1
            )));
        }
        m[(r, s)] = v;
    }
    Ok(m)
}

/// A covariance CSV interpreted with block size `block_dim`.
pub fn read_covariance_csv<R: Read>(input: R, block_dim: usize) -> Result<BlockCovariance> {
    let m = read_matrix_csv(input)?;
    if block_dim == 0 || m.nrows() % block_dim != 0 {
        return Err(Error::Decode(format!(
            "matrix size {} is not a multiple of block size {block_dim}",
            m.nrows()
        )));
    }
    let n = m.nrows() / block_dim;
    BlockCovariance::new(m, n, block_dim).map_err(|e| Error::Decode(e.to_string()))
}
