//! Row-oriented matrix storage shared by the estimators.
//!
//! Observation matrices only ever hold two distinct values, so they are stored
//! as one byte per entry (`0` for `lo`, `1` for `hi`). Estimators only need
//! row dot products and row axpy updates, which is what [`MatrixView`] exposes.

use crate::error::{invalid, Error, Result};

/// Minimal read-only interface needed by the spectral estimators.
///
/// Reductions run in a fixed order so results are bit-reproducible.
pub trait MatrixView {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `Σ_j X[i, j] · v[j]`.
    fn row_dot(&self, i: usize, v: &[f64]) -> f64;

    /// `out[j] += a · X[i, j]` for every column.
    fn row_axpy(&self, i: usize, a: f64, out: &mut [f64]);

    /// Sum of row `i`.
    fn row_sum(&self, i: usize) -> f64;

    /// `X v`.
    fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.ncols());
        (0..self.nrows()).map(|i| self.row_dot(i, v)).collect()
    }

    /// `Xᵀ u`.
    fn mul_t_vec(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.nrows());
        let mut out = vec![0.0; self.ncols()];
        for (i, &a) in u.iter().enumerate() {
            if a != 0.0 {
                self.row_axpy(i, a, &mut out);
            }
        }
        out
    }

    fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols()];
        for i in 0..self.nrows() {
            self.row_axpy(i, 1.0, &mut out);
        }
        out
    }

    fn is_zero(&self) -> bool {
        (0..self.nrows()).all(|i| self.row_is_zero(i))
    }

    fn row_is_zero(&self, i: usize) -> bool;
}

impl<M: MatrixView + ?Sized> MatrixView for &M {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        (**self).row_dot(i, v)
    }
    fn row_axpy(&self, i: usize, a: f64, out: &mut [f64]) {
        (**self).row_axpy(i, a, out)
    }
    fn row_sum(&self, i: usize) -> f64 {
        (**self).row_sum(i)
    }
    fn row_is_zero(&self, i: usize) -> bool {
        (**self).row_is_zero(i)
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid("ragged rows"));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        let data = u
            .iter()
            .flat_map(|&a| v.iter().map(move |&b| a * b))
            .collect();
        Self {
            rows: u.len(),
            cols: v.len(),
            data,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the rows in `order`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let data = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

impl MatrixView for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        dot(self.row(i), v)
    }
    fn row_axpy(&self, i: usize, a: f64, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.row(i)) {
            *o += a * x;
        }
    }
    fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
    fn row_is_zero(&self, i: usize) -> bool {
        self.row(i).iter().all(|&x| x == 0.0)
    }
}

/// Two-valued observation matrix.
///
/// Entry `(i, j)` equals `hi` when the stored bit is set and `lo` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    lo: f64,
    hi: f64,
    /// Reproducibility token of the draw that produced the matrix.
    pub seed: u64,
}

impl ObservationMatrix {
    /// Build from raw bits (`0` → `lo`, `1` → `hi`).
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(invalid(format!(
                "expected {} bits for a {rows}x{cols} matrix, got {}",
                rows * cols,
                bits.len()
            )));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(invalid(format!("bit {} at offset {pos} is not 0/1", bits[pos])));
        }
        if lo == hi || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!("levels {lo}, {hi} must be distinct and finite")));
        }
        Ok(Self {
            rows,
            cols,
            bits,
            lo,
            hi,
            seed,
        })
    }

    /// Build from real values, each of which must equal `lo` or `hi`.
    pub fn from_values(rows: &[Vec<f64>], lo: f64, hi: f64) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(invalid("ragged rows"));
            }
            for (j, &x) in row.iter().enumerate() {
                bits.push(if x == hi {
                    1
                } else if x == lo {
                    0
                } else {
                    return Err(Error::BadEntry {
                        row: i,
                        col: j,
                        value: x,
                        lo,
                        hi,
                    });
                });
            }
        }
        Self::from_bits(rows.len(), cols, bits, lo, hi, 0)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row_bits(&self, i: usize) -> &[u8] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j] == 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.bit(i, j) {
            self.hi
        } else {
            self.lo
        }
    }

    /// Same bits with new levels.
    pub fn relabel(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// Flip every bit, keeping the levels.
    pub fn complement_bits(mut self) -> Self {
        for b in &mut self.bits {
            *b ^= 1;
        }
        self
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let data = self
            .bits
            .iter()
            .map(|&b| if b == 1 { self.hi } else { self.lo })
            .collect();
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Copy of the rows in `order`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(order.len() * self.cols);
        for &i in order {
            bits.extend_from_slice(self.row_bits(i));
        }
        Self {
            rows: order.len(),
            bits,
            ..*self
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(invalid(format!(
                "cannot stack {} rows with {} rows",
                self.rows, other.rows
            )));
        }
        if self.lo != other.lo || self.hi != other.hi {
            return Err(invalid("cannot stack matrices with different levels"));
        }
        let cols = self.cols + other.cols;
        let mut bits = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            bits.extend_from_slice(self.row_bits(i));
            bits.extend_from_slice(other.row_bits(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            bits,
            lo: self.lo,
            hi: self.hi,
            seed: self.seed,
        })
    }

    /// Number of `hi` entries in row `i`.
    pub fn row_hi_count(&self, i: usize) -> usize {
        self.row_bits(i).iter().map(|&b| b as usize).sum()
    }
}

impl MatrixView for ObservationMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let row = self.row_bits(i);
        let hi_sum = dot_bits(row, v);
        if self.lo == 0.0 {
            self.hi * hi_sum
        } else {
            self.lo * v.iter().sum::<f64>() + (self.hi - self.lo) * hi_sum
        }
    }
    fn row_axpy(&self, i: usize, a: f64, out: &mut [f64]) {
        let row = self.row_bits(i);
        let base = a * self.lo;
        let step = a * (self.hi - self.lo);
        for (o, &b) in out.iter_mut().zip(row) {
            *o += base + step * b as f64;
        }
    }
    fn row_sum(&self, i: usize) -> f64 {
        let h = self.row_hi_count(i) as f64;
        h * self.hi + (self.cols as f64 - h) * self.lo
    }
    fn row_is_zero(&self, i: usize) -> bool {
        match (self.lo == 0.0, self.hi == 0.0) {
            (true, _) => self.row_bits(i).iter().all(|&b| b == 0),
            (_, true) => self.row_bits(i).iter().all(|&b| b == 1),
            _ => self.cols == 0,
        }
    }
}

/// Rows gathered from several matrices that share a column space.
pub struct RowSelection<'a> {
    parts: Vec<(&'a dyn MatrixView, usize)>,
    cols: usize,
}

impl<'a> RowSelection<'a> {
    pub fn new(cols: usize) -> Self {
        Self {
            parts: Vec::new(),
            cols,
        }
    }

    pub fn push_rows(&mut self, m: &'a dyn MatrixView, rows: impl IntoIterator<Item = usize>) {
        debug_assert_eq!(m.ncols(), self.cols);
        self.parts.extend(rows.into_iter().map(|i| (m, i)));
    }
}

impl MatrixView for RowSelection<'_> {
    fn nrows(&self) -> usize {
        self.parts.len()
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let (m, r) = self.parts[i];
        m.row_dot(r, v)
    }
    fn row_axpy(&self, i: usize, a: f64, out: &mut [f64]) {
        let (m, r) = self.parts[i];
        m.row_axpy(r, a, out)
    }
    fn row_sum(&self, i: usize) -> f64 {
        let (m, r) = self.parts[i];
        m.row_sum(r)
    }
    fn row_is_zero(&self, i: usize) -> bool {
        let (m, r) = self.parts[i];
        m.row_is_zero(r)
    }
}

/// Dot product with eight independent accumulators, combined in a fixed order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    reduce8(acc) + tail
}

fn dot_bits(bits: &[u8], v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let cb = bits.chunks_exact(8);
    let cv = v.chunks_exact(8);
    let (rb, rv) = (cb.remainder(), cv.remainder());
    for (b, x) in cb.zip(cv) {
        for l in 0..8 {
            acc[l] += b[l] as f64 * x[l];
        }
    }
    let tail: f64 = rb.iter().zip(rv).map(|(&b, x)| b as f64 * x).sum();
    reduce8(acc) + tail
}

#[inline]
fn reduce8(a: [f64; 8]) -> f64 {
    ((a[0] + a[4]) + (a[1] + a[5])) + ((a[2] + a[6]) + (a[3] + a[7]))
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ObservationMatrix {
        ObservationMatrix::from_values(&[vec![-0.5, 0.5, 0.5], vec![0.5, -0.5, -0.5]], -0.5, 0.5).unwrap()
    }

    #[test]
    fn observation_ops_match_dense() {
        let x = sample();
        let d = x.to_dense();
        let v = [0.3, -1.0, 2.0];
        let u = [1.5, -0.25];
        for i in 0..2 {
            assert!((x.row_dot(i, &v) - d.row_dot(i, &v)).abs() < 1e-15);
            assert!((x.row_sum(i) - d.row_sum(i)).abs() < 1e-15);
        }
        let a = x.mul_t_vec(&u);
        let b = d.mul_t_vec(&u);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_foreign_values() {
        let err = ObservationMatrix::from_values(&[vec![0.0, 2.0]], 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::BadEntry { row: 0, col: 1, .. }));
    }

    #[test]
    fn hstack_and_select() {
        let x = sample();
        let y = x.hstack(&x).unwrap();
        assert_eq!(y.ncols(), 6);
        assert_eq!(y.get(1, 3), 0.5);
        let s = y.select_rows(&[1]);
        assert_eq!(s.nrows(), 1);
        assert_eq!(s.row_bits(0), y.row_bits(1));
    }

    #[test]
    fn zero_rows_respect_levels() {
        let x = ObservationMatrix::from_values(&[vec![0.0, 0.0], vec![0.0, 1.0]], 0.0, 1.0).unwrap();
        assert!(x.row_is_zero(0));
        assert!(!x.row_is_zero(1));
        assert!(!sample().is_zero());
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..19).map(|i| i as f64).collect();
        let expect: f64 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), expect);
    }
}
