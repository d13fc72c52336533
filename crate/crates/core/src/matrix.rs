//! Dense row-major matrices and the handful of kernels the solvers need.

use std::fmt;
use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Below this many multiply-adds a product runs on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

/// Row-major `f64` matrix. Every entry is finite.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = self.row(i);
            writeln!(f, "  {:?}{}", &row[..row.len().min(8)], if row.len() > 8 { " ..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDimensions("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    // Kernel outputs skip the finiteness scan; callers that can overflow check
    // the objective instead.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        assert!(value.is_finite());
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_raw(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = *v;
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_raw(self.cols, self.rows, out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(mismatch("matmul", self, other));
        }
        let (n, p) = (other.cols, self.cols);
        let mut out = vec![0.0; self.rows * n];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for (l, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    axpy(a, other.row(l), out_row);
                }
            }
        };
        if self.rows * p * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Self::from_raw(self.rows, n, out))
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(mismatch("t_matmul", self, other));
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for l in 0..self.rows {
                let a = self.data[l * self.cols + i];
                if a != 0.0 {
                    axpy(a, other.row(l), out_row);
                }
            }
        };
        if self.rows * m * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Self::from_raw(m, n, out))
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(mismatch("matmul_t", self, other));
        }
        let n = other.rows;
        let mut out = vec![0.0; self.rows * n];
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        };
        if self.rows * self.cols * n >= PAR_THRESHOLD {
            out.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(Self::from_raw(self.rows, n, out))
    }

    /// `self · diag(d)`: column `j` multiplied by `d[j]`.
    pub fn scale_columns(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.cols {
            return Err(Error::ShapeMismatch {
                op: "scale_columns",
                detail: format!("{} columns vs {} weights", self.cols, d.len()),
            });
        }
        let mut out = self.data.clone();
        for row in out.chunks_mut(self.cols) {
            for (v, w) in row.iter_mut().zip(d) {
                *v *= w;
            }
        }
        Ok(Self::from_raw(self.rows, self.cols, out))
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (s, v) in sq.iter_mut().zip(row) {
                *s += v * v;
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Column means (one per row) across all columns.
    pub fn row_means(&self) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().sum::<f64>() / self.cols as f64)
            .collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

fn mismatch(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Error {
    Error::ShapeMismatch {
        op,
        detail: format!("{:?} with {:?}", a.shape(), b.shape()),
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Positive diagonal weights, one per column of the data matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagWeights(Vec<f64>);

impl DiagWeights {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvalidDimensions("empty weight vector".into()));
        }
        if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("diagonal weight {v} is not positive and finite")));
        }
        Ok(Self(d))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Matrix with i.i.d. entries uniform on `[low, high)`.
pub fn uniform_matrix(rows: usize, cols: usize, low: f64, high: f64, rng: &mut Rng) -> Result<DenseMatrix> {
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::InvalidBounds { low, high });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions(format!("{rows}x{cols} matrix")));
    }
    let data = (0..rows * cols).map(|_| rng.uniform(low, high)).collect();
    Ok(DenseMatrix::from_raw(rows, cols, data))
}

/// Sum of the Euclidean norms of the columns.
pub fn l21_norm(m: &DenseMatrix) -> f64 {
    m.column_norms().iter().sum()
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Splits `m` into entrywise nonnegative parts with `m = pos - neg`.
pub fn split_pos_neg(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    // max(v, 0) and max(-v, 0) equal (|v| ± v)/2 but are exact
    let pos = m.map(|v| if v > 0.0 { v } else { 0.0 });
    let neg = m.map(|v| if v < 0.0 { -v } else { 0.0 });
    (pos, neg)
}

/// Solves `a · y = b` for symmetric positive definite `a` (k×k) and `b` (k×c).
///
/// Uses a Cholesky factorization. If that breaks down the solve is retried
/// once with `1e-10 · trace(a) / k` added to the diagonal.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let k = a.rows;
    if a.cols != k {
        return Err(Error::ShapeMismatch {
            op: "solve_spd",
            detail: format!("system matrix is {:?}", a.shape()),
        });
    }
    if b.rows != k {
        return Err(mismatch("solve_spd", a, b));
    }
    let factor = match cholesky(a) {
        Ok(l) => l,
        Err(first) => {
            let jitter = 1e-10 * a.trace() / k as f64;
            if !(jitter > 0.0) {
                return Err(first);
            }
            let mut shifted = a.clone();
            for i in 0..k {
                shifted[(i, i)] += jitter;
            }
            cholesky(&shifted)?
        }
    };
    let mut y = b.clone();
    for j in 0..b.cols {
        let mut col = b.column(j);
        cholesky_solve_in_place(&factor, &mut col);
        y.set_column(j, &col);
    }
    Ok(y)
}

/// Lower-triangular `l` with `a = l lᵀ`.
fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let k = a.rows;
    let mut l = DenseMatrix::zeros(k, k);
    for j in 0..k {
        let mut diag = a[(j, j)];
        for p in 0..j {
            diag -= l[(j, p)] * l[(j, p)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..k {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

fn cholesky_solve_in_place(l: &DenseMatrix, b: &mut [f64]) {
    let k = l.rows;
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in i + 1..k {
            s -= l[(p, i)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
}
