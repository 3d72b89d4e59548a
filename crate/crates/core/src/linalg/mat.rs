use crate::linalg::LinalgError;
use crate::Scalar;

/// Dense real matrix stored column-major.
///
/// Column `j` holds the vector of task `j` when the matrix represents the
/// primal or dual variables of the multi-task problem, so column access is a
/// contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds a matrix from row-major values, the natural order for literals.
    pub fn from_row_major(rows: usize, cols: usize, values: &[T]) -> Result<Self, LinalgError> {
        if values.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Self::from_fn(rows, cols, |r, c| values[r * cols + c]))
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for col in columns {
            if col.len() != rows {
                return Err(LinalgError::DimensionMismatch {
                    expected: rows,
                    found: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Ok(Mat {
            rows,
            cols: columns.len(),
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[c * self.rows + r] = v;
    }

    #[inline]
    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn set_col(&mut self, c: usize, values: &[T]) {
        self.col_mut(c).copy_from_slice(values);
    }

    /// Column-major backing storage.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `M v`, length `rows`.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        let mut out = vec![T::zero(); self.rows];
        for (c, &vc) in v.iter().enumerate() {
            if vc == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.col(c)) {
                *o += m * vc;
            }
        }
        out
    }

    /// `Mᵀ u`, length `cols`.
    pub fn tr_mul_vec(&self, u: &[T]) -> Vec<T> {
        debug_assert_eq!(u.len(), self.rows);
        (0..self.cols).map(|c| dot(self.col(c), u)).collect()
    }

    pub fn matmul(&self, other: &Mat<T>) -> Result<Mat<T>, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            let prod = self.mul_vec(other.col(c));
            out.set_col(c, &prod);
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Symmetric to an absolute tolerance `tol`.
    pub fn is_symmetric(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        for c in 0..self.cols {
            for r in (c + 1)..self.rows {
                if (self.get(r, c) - self.get(c, r)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn sub(&self, other: &Mat<T>) -> Result<Mat<T>, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn scaled(&self, k: T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    pub fn column_norms(&self) -> Vec<T> {
        (0..self.cols).map(|c| norm2(self.col(c))).collect()
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Scales `v` to unit Euclidean norm in place and returns the old norm.
pub fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let n = norm2(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Sparse vector of fixed dimension with strictly increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec<T> {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseVec<T> {
    /// Entries may come in any order; duplicate or out-of-range indices and
    /// non-finite values are rejected. Explicit zeros are kept.
    pub fn new(dim: usize, mut entries: Vec<(usize, T)>) -> Result<Self, LinalgError> {
        entries.sort_by_key(|&(i, _)| i);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(LinalgError::DuplicateIndex(w[0].0));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= dim {
                return Err(LinalgError::IndexOutOfRange { index: i, dim });
            }
        }
        if entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(SparseVec {
            dim,
            indices,
            values,
        })
    }

    /// Dense input; every coordinate is stored.
    pub fn from_dense(values: &[T]) -> Self {
        SparseVec {
            dim: values.len(),
            indices: (0..values.len()).collect(),
            values: values.to_vec(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// `⟨self, w⟩` summed in index order.
    #[inline]
    pub fn dot_dense(&self, w: &[T]) -> T {
        let mut acc = T::zero();
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc += v * w[i];
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn norm2(&self) -> T {
        norm2(&self.values)
    }

    /// Same entries embedded in a (possibly larger) ambient dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self, LinalgError> {
        if let Some(&i) = self.indices.last() {
            if i >= dim {
                return Err(LinalgError::IndexOutOfRange { index: i, dim });
            }
        }
        Ok(SparseVec {
            dim,
            indices: self.indices.clone(),
            values: self.values.clone(),
        })
    }
}
