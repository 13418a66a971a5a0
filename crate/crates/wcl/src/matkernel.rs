//! Dense-matrix layer: storage, row normalization, cosine similarity and
//! stable softmax primitives. Everything downstream builds on these.
//!
//! All public operations are pure: inputs are untouched and outputs are
//! freshly allocated. Storage is row-major `f64`.

use std::io::{Read, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::WclError;

/// Row norms below this are treated as degenerate rather than normalized.
pub const NORM_EPS: f64 = 1e-12;

const WCLE_MAGIC: &[u8; 4] = b"WCLE";

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, WclError> {
        if data.len() != rows * cols {
            return Err(WclError::ShapeMismatch {
                expected: format!("{} values for {}x{}", rows * cols, rows, cols),
                got: format!("{}", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Selects the given rows into a new matrix, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(indices.len(), self.cols);
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self += scale * other`, shapes must match.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.data.iter_mut() {
            *v *= s;
        }
    }

    /// `self * other`, (n×k)·(k×m) → n×m.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dims");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let data = map_rows(n, m, |i, out| {
            let a = self.row(i);
            for (p, &av) in a.iter().enumerate().take(k) {
                if av == 0.0 {
                    continue;
                }
                let b = other.row(p);
                for (j, o) in out.iter_mut().enumerate() {
                    *o += av * b[j];
                }
            }
        });
        Matrix {
            rows: n,
            cols: m,
            data,
        }
    }

    /// `self * otherᵀ`, (n×k)·(m×k)ᵀ → n×m.
    pub fn matmul_bt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_bt inner dims");
        let (n, m) = (self.rows, other.rows);
        let data = map_rows(n, m, |i, out| {
            let a = self.row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        });
        Matrix {
            rows: n,
            cols: m,
            data,
        }
    }

    /// `selfᵀ * other`, (k×n)ᵀ·(k×m) → n×m.
    pub fn matmul_at_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_at_b inner dims");
        let (k, n, m) = (self.rows, self.cols, other.cols);
        let data = map_rows(n, m, |i, out| {
            for p in 0..k {
                let av = self.get(p, i);
                if av == 0.0 {
                    continue;
                }
                let b = other.row(p);
                for (j, o) in out.iter_mut().enumerate() {
                    *o += av * b[j];
                }
            }
        });
        Matrix {
            rows: n,
            cols: m,
            data,
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Fills each output row through `f`; rows are independent so the parallel
/// and sequential paths are bit-identical.
pub(crate) fn map_rows<F>(rows: usize, cols: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let mut data = vec![0.0; rows * cols];
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(cols.max(1))
        .enumerate()
        .for_each(|(i, out)| f(i, out));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(cols.max(1))
        .enumerate()
        .for_each(|(i, out)| f(i, out));
    data
}

/// Batch of embeddings: rows are unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    mat: Matrix,
}

impl EmbeddingBatch {
    /// Wraps a matrix whose rows are already unit norm (checked in debug).
    pub(crate) fn from_unit_rows(mat: Matrix) -> Self {
        debug_assert!((0..mat.rows()).all(|i| (l2_norm(mat.row(i)) - 1.0).abs() < 1e-9));
        EmbeddingBatch { mat }
    }

    /// Wraps a matrix without the unit-norm check. Loss kernels read rows
    /// as given, so finite-difference probes need to nudge raw entries.
    #[doc(hidden)]
    pub fn from_raw(mat: Matrix) -> Self {
        EmbeddingBatch { mat }
    }

    pub fn mat(&self) -> &Matrix {
        &self.mat
    }

    pub fn len(&self) -> usize {
        self.mat.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mat.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.mat.row(i)
    }
}

/// Scales every row of `m` to unit L2 norm.
pub fn l2_normalize_rows(m: &Matrix) -> Result<EmbeddingBatch, WclError> {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let norm = l2_norm(out.row(i));
        if norm < NORM_EPS {
            return Err(WclError::ZeroRow { row: i });
        }
        let inv = 1.0 / norm;
        for v in out.row_mut(i) {
            *v *= inv;
        }
    }
    Ok(EmbeddingBatch::from_unit_rows(out))
}

/// Pairwise cosine similarities: `out[i][j] = dot(a.row(i), b.row(j))`.
pub fn cosine_similarity_matrix(
    a: &EmbeddingBatch,
    b: &EmbeddingBatch,
) -> Result<Matrix, WclError> {
    if a.dim() != b.dim() {
        return Err(WclError::DimensionMismatch {
            left: format!("{} cols", a.dim()),
            right: format!("{} cols", b.dim()),
        });
    }
    Ok(a.mat().matmul_bt(b.mat()))
}

/// Sequential variant of [`cosine_similarity_matrix`], kept for benchmarking
/// the parallel kernel against a plain loop.
pub fn cosine_similarity_matrix_seq(
    a: &EmbeddingBatch,
    b: &EmbeddingBatch,
) -> Result<Matrix, WclError> {
    if a.dim() != b.dim() {
        return Err(WclError::DimensionMismatch {
            left: format!("{} cols", a.dim()),
            right: format!("{} cols", b.dim()),
        });
    }
    let (n, m) = (a.len(), b.len());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out.set(i, j, dot(a.row(i), b.row(j)));
        }
    }
    Ok(out)
}

/// Numerically stable log-softmax of one row: shifts by the max before
/// exponentiating so huge logits cannot overflow.
pub fn log_softmax_row(v: &[f64]) -> Result<Vec<f64>, WclError> {
    if v.is_empty() {
        return Err(WclError::EmptyInput);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    Ok(v.iter().map(|x| x - max - log_sum).collect())
}

/// `log(Σ exp(v))`, max-shifted.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Writes a matrix in the WCLE format: magic "WCLE", u32-LE rows, u32-LE
/// cols, then row-major f32-LE values.
pub fn write_wcle(path: &Path, m: &Matrix) -> Result<(), WclError> {
    let mut buf = Vec::with_capacity(12 + 4 * m.data().len());
    buf.extend_from_slice(WCLE_MAGIC);
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads a WCLE matrix file, widening the stored f32 values to f64.
pub fn read_wcle(path: &Path) -> Result<Matrix, WclError> {
    let malformed = |reason: &str| WclError::MalformedFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(malformed("file shorter than header"));
    }
    if &bytes[0..4] != WCLE_MAGIC {
        return Err(malformed("bad magic"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + rows * cols * 4;
    if bytes.len() != expected {
        return Err(malformed("payload size does not match header"));
    }
    let data = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}
