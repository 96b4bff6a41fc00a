//! Dense row-major 2-D arrays and the column operations the projectors need.
//!
//! Every parameter is two-dimensional; vectors such as biases are stored as
//! `1 x n` tensors so that column blocking applies uniformly.

use crate::error::{Error, Result};

/// Dense row-major `rows x cols` array of `f64`.
///
/// Construction rejects NaN and infinities. A tensor may have zero columns,
/// which is how an empty subspace selection is represented.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ParamTensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput {
                context: "tensor construction",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a tensor from nested rows. All rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: (rows.len(), cols),
                    actual: (rows.len(), r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale_in_place(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    pub fn ensure_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: self.shape(),
            });
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &ParamTensor) -> Result<()> {
        other.ensure_shape(self.shape())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ParamTensor) -> Result<ParamTensor> {
        other.ensure_shape(self.shape())?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Euclidean norm of each column.
    pub fn col_l2_norms(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)).take(self.rows) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x * x;
            }
        }
        sums.into_iter().map(f64::sqrt).collect()
    }

    /// Gathers the columns listed in `idx` (strictly increasing) into a new
    /// `rows x idx.len()` tensor.
    pub fn select_cols(&self, idx: &[usize]) -> Result<ParamTensor> {
        check_index_set(idx, self.cols)?;
        let width = idx.len();
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(Self {
            rows: self.rows,
            cols: width,
            data,
        })
    }

    /// Places column `j` of `sub` at column `idx[j]` of a zero
    /// `rows x total_cols` tensor.
    pub fn scatter_cols(sub: &ParamTensor, idx: &[usize], total_cols: usize) -> Result<ParamTensor> {
        if idx.len() != sub.cols {
            return Err(Error::ShapeMismatch {
                expected: (sub.rows, idx.len()),
                actual: sub.shape(),
            });
        }
        check_index_set(idx, total_cols)?;
        let mut out = Self::zeros(sub.rows, total_cols);
        for r in 0..sub.rows {
            let src = &sub.data[r * sub.cols..(r + 1) * sub.cols];
            let dst = &mut out.data[r * total_cols..(r + 1) * total_cols];
            for (&j, &x) in idx.iter().zip(src) {
                dst[j] = x;
            }
        }
        Ok(out)
    }
}

fn check_index_set(idx: &[usize], cols: usize) -> Result<()> {
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    if let Some(&last) = idx.last() {
        if last >= cols {
            return Err(Error::IndexOutOfRange { index: last, cols });
        }
    }
    Ok(())
}
