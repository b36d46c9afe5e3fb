//! k-mer min-hash sketches and collision matrices.
//!
//! K-mers are packed two bits per base (`A=0, C=1, G=2, T=3`, first base in
//! the most significant position), so `k ≤ 32`. The hash of k-mer code `x`
//! under seed `s` is
//!
//! ```text
//! h_s(x) = fmix64(x ^ fmix64(s))
//! fmix64(z): z ^= z >> 33; z *= 0xff51afd7ed558ccd;
//!            z ^= z >> 33; z *= 0xc4ceb9fe1a85ec53; z ^= z >> 33
//! ```
//!
//! `fmix64` is a bijection, so distinct k-mers never tie under one seed.
//! Hash seeds for an experiment are `seed::derive(root, [j])`.
//!
//! Collisions are `Y_ij = 1{h_j(S_0) = h_j(S_i)}`; the rank-one form is the
//! Z-channel `X = 1 − Y`, whose item value is `1 − JS`. Larger overlaps
//! therefore have *smaller* item values.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter, Read as _, Write as _};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::{norm, MatrixView, ObservationMatrix};
use crate::model::Family;
use crate::sampler::{CalibrationBlock, ColumnSource, Draw};
use crate::seed;

/// Magic bytes of the sketch file format.
pub const SKETCH_MAGIC: &[u8; 8] = b"MHSKETCH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Read {
    pub id: String,
    pub sequence: String,
    pub is_calibration: bool,
}

impl Read {
    pub fn new(id: impl Into<String>, sequence: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            sequence: sequence.into(),
            is_calibration: false,
        }
    }

    pub fn calibration(id: impl Into<String>, sequence: impl Into<String>) -> Self {
        Self {
            is_calibration: true,
            ..Self::new(id, sequence)
        }
    }
}

#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z ^= z >> 33;
    z = z.wrapping_mul(0xff51_afd7_ed55_8ccd);
    z ^= z >> 33;
    z = z.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

/// `h_s(x)` for a packed k-mer code.
#[inline]
pub fn kmer_hash(code: u64, seed: u64) -> u64 {
    fmix64(code ^ fmix64(seed))
}

/// `count` hash seeds derived from `root`.
pub fn hash_seeds(root: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|j| seed::derive(root, &[j])).collect()
}

fn base_code(b: u8) -> Option<u64> {
    match b {
        b'A' | b'a' => Some(0),
        b'C' | b'c' => Some(1),
        b'G' | b'g' => Some(2),
        b'T' | b't' => Some(3),
        _ => None,
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > 32 {
        return Err(invalid(format!("k = {k} must lie in [1, 32]")));
    }
    Ok(())
}

fn reverse_complement(code: u64, k: usize) -> u64 {
    let mut rc = 0;
    let mut c = code;
    for _ in 0..k {
        rc = (rc << 2) | (3 - (c & 3));
        c >>= 2;
    }
    rc
}

/// Sorted, deduplicated k-mer codes of `sequence`.
///
/// With `canonical`, each k-mer is replaced by the smaller of itself and its
/// reverse complement.
pub fn kmer_codes(sequence: &str, k: usize, canonical: bool) -> Result<Vec<u64>> {
    check_k(k)?;
    let bytes = sequence.as_bytes();
    if bytes.len() < k {
        return Err(Error::ShortSequence { len: bytes.len(), k });
    }
    let mask = if k == 32 { u64::MAX } else { (1u64 << (2 * k)) - 1 };
    let mut codes = Vec::with_capacity(bytes.len() - k + 1);
    let mut code = 0u64;
    for (pos, &b) in bytes.iter().enumerate() {
        let c = base_code(b).ok_or_else(|| invalid(format!("invalid base {:?} at position {pos}", b as char)))?;
        code = ((code << 2) | c) & mask;
        if pos + 1 >= k {
            codes.push(if canonical { code.min(reverse_complement(code, k)) } else { code });
        }
    }
    codes.sort_unstable();
    codes.dedup();
    Ok(codes)
}

/// All distinct length-`k` substrings.
pub fn kmer_set(sequence: &str, k: usize) -> Result<BTreeSet<String>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if sequence.len() < k {
        return Err(Error::ShortSequence { len: sequence.len(), k });
    }
    Ok((0..=sequence.len() - k).map(|i| sequence[i..i + k].to_string()).collect())
}

/// Exact k-mer Jaccard similarity by set arithmetic.
pub fn jaccard_exact(s0: &str, s1: &str, k: usize) -> Result<f64> {
    let a = kmer_set(s0, k)?;
    let b = kmer_set(s1, k)?;
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Fraction of collisions in a row.
pub fn jaccard_estimate(row: &[u8]) -> Result<f64> {
    if row.is_empty() {
        return Err(invalid("empty collision row"));
    }
    Ok(row.iter().map(|&b| b as usize).sum::<usize>() as f64 / row.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadSketch {
    pub id: String,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub minima: Vec<u64>,
}

fn minima(codes: &[u64], seeds: &[u64]) -> Vec<u64> {
    seeds
        .iter()
        .map(|&s| {
            let key = fmix64(s);
            codes.iter().map(|&c| fmix64(c ^ key)).min().expect("codes are nonempty")
        })
        .collect()
}

pub fn sketch(read: &Read, k: usize, seeds: &[u64]) -> Result<ReadSketch> {
    sketch_with(read, k, seeds, false)
}

pub fn sketch_with(read: &Read, k: usize, seeds: &[u64], canonical: bool) -> Result<ReadSketch> {
    if seeds.is_empty() {
        return Err(invalid("at least one hash seed is required"));
    }
    let codes = kmer_codes(&read.sequence, k, canonical)?;
    Ok(ReadSketch {
        id: read.id.clone(),
        k,
        seeds: seeds.to_vec(),
        minima: minima(&codes, seeds),
    })
}

/// Sketch many reads in parallel.
pub fn sketch_all(reads: &[Read], k: usize, seeds: &[u64], canonical: bool) -> Result<Vec<ReadSketch>> {
    reads.par_iter().map(|r| sketch_with(r, k, seeds, canonical)).collect()
}

/// `Y` for one reference against a read set, rows in read order.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMatrix {
    pub y: ObservationMatrix,
    pub reference_id: String,
    pub row_ids: Vec<String>,
}

impl CollisionMatrix {
    pub fn from_sketches(reference: &ReadSketch, reads: &[ReadSketch]) -> Result<Self> {
        let m = reference.minima.len();
        let mut bits = Vec::with_capacity(reads.len() * m);
        for r in reads {
            if r.seeds != reference.seeds || r.k != reference.k {
                return Err(invalid(format!("sketch {} uses different k or seeds than the reference", r.id)));
            }
            bits.extend(r.minima.iter().zip(&reference.minima).map(|(a, b)| (a == b) as u8));
        }
        Ok(Self {
            y: ObservationMatrix::from_bits(reads.len(), m, bits, 0.0, 1.0, 0)?,
            reference_id: reference.id.clone(),
            row_ids: reads.iter().map(|r| r.id.clone()).collect(),
        })
    }

    /// Rank-one form `X = 1 − Y`.
    pub fn to_observations(&self) -> ObservationMatrix {
        Family::OrZ.transform(self.y.clone())
    }
}

pub fn collision_matrix(reference: &Read, reads: &[Read], k: usize, seeds: &[u64]) -> Result<CollisionMatrix> {
    let r = sketch(reference, k, seeds)?;
    let s = sketch_all(reads, k, seeds, false)?;
    CollisionMatrix::from_sketches(&r, &s)
}

/// `‖v̂‖` from calibration rows of `X = 1 − Y`, whose item value is taken to be 1.
pub fn calibrate_v_norm(y: &CollisionMatrix, calibration_rows: &[usize]) -> Result<f64> {
    if calibration_rows.is_empty() {
        return Err(invalid("no calibration rows"));
    }
    let m = y.y.ncols();
    let mut v = vec![0.0; m];
    for &i in calibration_rows {
        if i >= y.y.nrows() {
            return Err(Error::UnknownRow(i));
        }
        for (vj, &b) in v.iter_mut().zip(y.y.row_bits(i)) {
            *vj += 1.0 - b as f64;
        }
    }
    let scale = 1.0 / calibration_rows.len() as f64;
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(norm(&v))
}

/// Parse FASTA text; `path` only labels errors.
pub fn parse_fasta_str(text: &str, path: &Path) -> Result<Vec<Read>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reads: Vec<(Read, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            let id = header.split_whitespace().next().unwrap_or("");
            if id.is_empty() {
                return Err(err(line_no, "header without an id".into()));
            }
            if let Some((r, at)) = reads.last() {
                if r.sequence.is_empty() {
                    return Err(err(*at, format!("record {} has an empty sequence", r.id)));
                }
            }
            reads.push((Read::new(id, String::new()), line_no));
        } else if line.trim().is_empty() {
            continue;
        } else {
            let Some((r, _)) = reads.last_mut() else {
                return Err(err(line_no, "sequence data before the first header".into()));
            };
            let line = line.trim();
            if let Some(bad) = line.chars().find(|c| !matches!(c, 'A' | 'C' | 'G' | 'T' | 'a' | 'c' | 'g' | 't')) {
                return Err(err(line_no, format!("invalid character {bad:?} in sequence")));
            }
            r.sequence.push_str(&line.to_ascii_uppercase());
        }
    }
    match reads.last() {
        None => Err(err(1, "no FASTA records".into())),
        Some((r, at)) if r.sequence.is_empty() => Err(err(*at, format!("record {} has an empty sequence", r.id))),
        _ => Ok(reads.into_iter().map(|(r, _)| r).collect()),
    }
}

pub fn parse_fasta(path: &Path) -> Result<Vec<Read>> {
    let text = fs::read_to_string(path)?;
    parse_fasta_str(&text, path)
}

/// Write reads as FASTA with 80-column sequence lines.
pub fn write_fasta(path: &Path, reads: &[Read]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in reads {
        writeln!(w, ">{}", r.id)?;
        for chunk in r.sequence.as_bytes().chunks(80) {
            w.write_all(chunk)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialize sketches that share `k` and seeds.
///
/// Layout (little endian): magic, `k: u32`, `count: u32`, `count × u64` seeds,
/// then per read `id_len: u32`, id bytes, `count × u64` minima.
pub fn write_sketches(path: &Path, sketches: &[ReadSketch]) -> Result<()> {
    let first = sketches.first().ok_or_else(|| invalid("no sketches to write"))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(SKETCH_MAGIC)?;
    w.write_all(&(first.k as u32).to_le_bytes())?;
    w.write_all(&(first.seeds.len() as u32).to_le_bytes())?;
    for s in &first.seeds {
        w.write_all(&s.to_le_bytes())?;
    }
    for s in sketches {
        if s.k != first.k || s.seeds != first.seeds {
            return Err(invalid(format!("sketch {} uses different k or seeds", s.id)));
        }
        w.write_all(&(s.id.len() as u32).to_le_bytes())?;
        w.write_all(s.id.as_bytes())?;
        for m in &s.minima {
            w.write_all(&m.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_sketches(path: &Path) -> Result<Vec<ReadSketch>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |msg: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, format!("{}: {msg}", path.display())));
    let mut pos = 0usize;
    let mut take = |n: usize| -> Option<&[u8]> {
        let s = buf.get(pos..pos + n)?;
        pos += n;
        Some(s)
    };
    if take(8) != Some(SKETCH_MAGIC.as_slice()) {
        return Err(bad("not a sketch file"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().expect("8 bytes"));
    let k = u32_at(take(4).ok_or_else(|| bad("truncated header"))?);
    let count = u32_at(take(4).ok_or_else(|| bad("truncated header"))?);
    let seeds: Vec<u64> = (0..count)
        .map(|_| take(8).map(u64_at).ok_or_else(|| bad("truncated seeds")))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    while let Some(len) = take(4) {
        let len = u32_at(len);
        let id = take(len).ok_or_else(|| bad("truncated id"))?;
        let id = String::from_utf8(id.to_vec()).map_err(|_| bad("id is not UTF-8"))?;
        let minima: Vec<u64> = (0..count)
            .map(|_| take(8).map(u64_at).ok_or_else(|| bad("truncated minima")))
            .collect::<Result<_>>()?;
        out.push(ReadSketch {
            id,
            k,
            seeds: seeds.clone(),
            minima,
        });
    }
    Ok(out)
}

/// Collision indicators for a fixed read set against a fixed pool of hash seeds.
///
/// Rows are the items followed by the calibration reads. Building the pool
/// once lets many trials draw disjoint column subsets without rehashing.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionPool {
    n_items: usize,
    n_calibration: usize,
    m: usize,
    /// Row-major `Y` bits, `(n_items + n_calibration) × m`.
    y: Vec<u8>,
}

impl CollisionPool {
    pub fn build(reference: &Read, items: &[Read], calibration: &[Read], k: usize, seeds: &[u64]) -> Result<Self> {
        if items.is_empty() || seeds.is_empty() {
            return Err(invalid("collision pool needs items and seeds"));
        }
        let ref_codes = kmer_codes(&reference.sequence, k, false)?;
        let ref_min = minima(&ref_codes, seeds);
        let rows: Vec<&Read> = items.iter().chain(calibration).collect();
        let codes: Vec<Vec<u64>> = rows
            .par_iter()
            .map(|r| kmer_codes(&r.sequence, k, false))
            .collect::<Result<_>>()?;
        let m = seeds.len();
        let y: Vec<u8> = codes
            .par_iter()
            .flat_map_iter(|c| {
                minima(c, seeds)
                    .into_iter()
                    .zip(ref_min.clone())
                    .map(|(a, b)| (a == b) as u8)
                    .collect::<Vec<u8>>()
            })
            .collect();
        Ok(Self {
            n_items: items.len(),
            n_calibration: calibration.len(),
            m,
            y,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_columns(&self) -> usize {
        self.m
    }

    /// Exact row means of `Y` over the whole pool.
    pub fn collision_rates(&self) -> Vec<f64> {
        self.y
            .chunks(self.m)
            .take(self.n_items)
            .map(|r| r.iter().map(|&b| b as usize).sum::<usize>() as f64 / self.m as f64)
            .collect()
    }

    fn gather(&self, rows: impl Iterator<Item = usize>, cols: &[u32]) -> (usize, Vec<u8>) {
        let mut bits = Vec::new();
        let mut count = 0;
        for i in rows {
            let row = &self.y[i * self.m..(i + 1) * self.m];
            bits.extend(cols.iter().map(|&j| 1 - row[j as usize]));
            count += 1;
        }
        (count, bits)
    }
}

/// Column source over a [`CollisionPool`]: each draw consumes unused pool
/// columns in a seed-determined order and returns `X = 1 − Y`.
#[derive(Debug, Clone)]
pub struct PoolSource {
    pool: Arc<CollisionPool>,
    order: Vec<u32>,
    next: usize,
}

impl PoolSource {
    /// `seed = None` keeps the pool's own column order.
    pub fn new(pool: Arc<CollisionPool>, seed: Option<u64>) -> Self {
        let mut order: Vec<u32> = (0..pool.m as u32).collect();
        if let Some(s) = seed {
            order.shuffle(&mut seed::stream(s));
        }
        Self { pool, order, next: 0 }
    }

    pub fn remaining_columns(&self) -> usize {
        self.order.len() - self.next
    }
}

impl ColumnSource for PoolSource {
    fn n_items(&self) -> usize {
        self.pool.n_items
    }

    fn draw(&mut self, items: &[usize], n_cols: usize) -> Result<Draw> {
        if let Some(&bad) = items.iter().find(|&&i| i >= self.pool.n_items) {
            return Err(Error::UnknownRow(bad));
        }
        if n_cols > self.remaining_columns() {
            return Err(Error::Sampler(format!(
                "collision pool exhausted: {n_cols} columns requested, {} left",
                self.remaining_columns()
            )));
        }
        let cols = &self.order[self.next..self.next + n_cols];
        self.next += n_cols;
        let (rows, bits) = self.pool.gather(items.iter().copied(), cols);
        let x = ObservationMatrix::from_bits(rows, n_cols, bits, 0.0, 1.0, 0)?;
        let calibration = if self.pool.n_calibration > 0 {
            let start = self.pool.n_items;
            let (c, bits) = self.pool.gather(start..start + self.pool.n_calibration, cols);
            Some(CalibrationBlock {
                x: ObservationMatrix::from_bits(c, n_cols, bits, 0.0, 1.0, 0)?,
                known_u: 1.0,
            })
        } else {
            None
        };
        Ok(Draw {
            items: x,
            calibration,
            v_norm: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmer_set_examples() {
        let s: Vec<String> = kmer_set("ACGTA", 3).unwrap().into_iter().collect();
        assert_eq!(s, vec!["ACG", "CGT", "GTA"]);
        assert_eq!(kmer_set("AAAA", 2).unwrap().len(), 1);
        assert_eq!(kmer_set("ACGT", 4).unwrap().len(), 1);
        assert!(matches!(kmer_set("AC", 3), Err(Error::ShortSequence { len: 2, k: 3 })));
    }

    #[test]
    fn codes_match_strings() {
        let codes = kmer_codes("ACGTA", 3, false).unwrap();
        // ACG = 0b000110, CGT = 0b011011, GTA = 0b101100
        assert_eq!(codes, vec![0b000110, 0b011011, 0b101100]);
        assert!(kmer_codes("ACNT", 2, false).is_err());
        assert!(kmer_codes("ACGT", 33, false).is_err());
    }

    #[test]
    fn canonical_codes_are_strand_symmetric() {
        let a = kmer_codes("ACCGTTAG", 4, true).unwrap();
        let b = kmer_codes("CTAACGGT", 4, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(reverse_complement(0b000110, 3), 0b011011);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard_exact("ACGT", "CGTA", 2).unwrap(), 0.5);
        assert_eq!(jaccard_exact("ACGTAC", "ACGTAC", 3).unwrap(), 1.0);
        assert_eq!(jaccard_exact("AAAA", "CCCC", 2).unwrap(), 0.0);
        assert_eq!(jaccard_estimate(&[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(jaccard_estimate(&[1, 1]).unwrap(), 1.0);
        assert!(jaccard_estimate(&[]).is_err());
    }

    #[test]
    fn hash_reference_values() {
        assert_eq!(fmix64(0), 0);
        assert_eq!(kmer_hash(5, 0), fmix64(5));
        assert_ne!(kmer_hash(5, 1), kmer_hash(5, 2));
    }

    #[test]
    fn sketch_is_set_based() {
        let seeds = hash_seeds(1, 32);
        let a = sketch(&Read::new("a", "ACGTACGT"), 4, &seeds).unwrap();
        let b = sketch(&Read::new("b", "ACGTACGTACGT"), 4, &seeds).unwrap();
        assert_eq!(a.minima, b.minima);
        assert!(sketch(&Read::new("a", "ACGT"), 2, &[]).is_err());
    }

    #[test]
    fn collision_rows() {
        let seeds = hash_seeds(3, 200);
        let r = Read::new("r", "ACGTTGCA");
        let y = collision_matrix(&r, &[r.clone(), Read::new("z", "AAAAAAAA")], 3, &seeds).unwrap();
        assert!(y.y.row_bits(0).iter().all(|&b| b == 1));
        assert!(y.y.row_bits(1).iter().all(|&b| b == 0));
        let x = y.to_observations();
        assert_eq!(x.row_hi_count(1), 200);
    }

    #[test]
    fn calibration_norm() {
        let seeds = hash_seeds(3, 50);
        let r = Read::new("r", "ACGTTGCA");
        let y = collision_matrix(&r, &[Read::new("z", "AAAAAAAA")], 3, &seeds).unwrap();
        assert!((calibrate_v_norm(&y, &[0]).unwrap() - 50f64.sqrt()).abs() < 1e-12);
        assert!(calibrate_v_norm(&y, &[]).is_err());
    }

    #[test]
    fn fasta_examples() {
        let p = Path::new("mem.fa");
        assert_eq!(parse_fasta_str(">r1\nACGT\n", p).unwrap(), vec![Read::new("r1", "ACGT")]);
        assert_eq!(parse_fasta_str(">r1 desc\nac\nGT\n", p).unwrap()[0].sequence, "ACGT");
        assert!(matches!(parse_fasta_str(">r1\nACXT\n", p), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_fasta_str("", p), Err(Error::Parse { .. })));
        assert!(matches!(parse_fasta_str(">a\n>b\nAC\n", p), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_fasta_str(">a\nAC\n>b\n", p), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn pool_source_draws_disjoint_columns() {
        let seeds = hash_seeds(9, 40);
        let reference = Read::new("ref", "ACGTTGCAAGGCTTAC");
        let items = vec![reference.clone(), Read::new("b", "TTTTTTTTTTTTTTTT")];
        let cal = vec![Read::calibration("c", "GGGGGGGGGGGGGGGG")];
        let pool = Arc::new(CollisionPool::build(&reference, &items, &cal, 4, &seeds).unwrap());
        assert_eq!(pool.collision_rates()[0], 1.0);
        let mut src = PoolSource::new(pool, Some(1));
        let d = src.draw(&[1, 0], 30).unwrap();
        assert_eq!(d.items.row_hi_count(0), 30);
        assert_eq!(d.items.row_hi_count(1), 0);
        assert_eq!(d.calibration.unwrap().known_u, 1.0);
        assert!(src.draw(&[0], 11).is_err());
        assert!(src.draw(&[0], 10).is_ok());
    }
}
