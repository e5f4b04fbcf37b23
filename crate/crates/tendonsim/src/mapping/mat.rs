//! A small row-major matrix with exactly the kernels the trainer needs.
//!
//! The hot loops of training are three products (`X W1^T`, `H W2^T`, and the
//! gradient accumulations `dH^T X`, `d2^T H`), so this type provides those
//! directly instead of pulling in a BLAS. The inner dot product runs four
//! accumulators so the compiler can vectorize it.

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from row-major data; panics if the length is inconsistent.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {rows}x{cols}",
            data.len()
        );
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copies the listed rows into a new matrix, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Mat {
        let mut out = Mat::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            out.row_mut(dst).copy_from_slice(self.row(src));
        }
        out
    }

    /// `self * other^T`; `other` has shape `n x k` with `k == self.cols`.
    pub fn mul_bt(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for j in 0..other.rows {
                o[j] = dot(a, other.row(j));
            }
        }
        out
    }

    /// Plain `self * other`.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            for (k, &aik) in a.iter().enumerate() {
                let b = other.row(k);
                let o = out.row_mut(i);
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += aik * bv;
                }
            }
        }
        out
    }

    /// `self^T * other`, accumulated row by row so both operands stream
    /// through cache in row order.
    pub fn at_b(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "row counts differ");
        let mut out = Mat::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ari) in a.iter().enumerate() {
                let o = out.row_mut(i);
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += ari * bv;
                }
            }
        }
        out
    }

    /// Column sums as a vector of length `cols`.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}
