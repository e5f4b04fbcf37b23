//! Per-column affine scaling into roughly `[-1, 1]`.
//!
//! Fitted on training rows only, so validation and test data pass through the
//! same map without leaking their ranges into it.

use super::mat::Mat;

/// `y = scale * x + offset`, columnwise.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScaler {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineScaler {
    /// Fits min/max over the listed rows of `x` so those rows map onto
    /// `[-1, 1]`. A column with (near) zero range maps its value to 0 with
    /// gain 2 rather than dividing by zero.
    pub fn fit(x: &Mat, rows: &[usize]) -> Self {
        assert!(!rows.is_empty(), "cannot fit a scaler on zero rows");
        let mut lo = vec![f64::INFINITY; x.cols];
        let mut hi = vec![f64::NEG_INFINITY; x.cols];
        for &r in rows {
            for (c, &v) in x.row(r).iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let mut scale = Vec::with_capacity(x.cols);
        let mut offset = Vec::with_capacity(x.cols);
        for c in 0..x.cols {
            let d = if hi[c] - lo[c] < 1e-12 {
                1.0
            } else {
                hi[c] - lo[c]
            };
            scale.push(2.0 / d);
            offset.push(-(hi[c] + lo[c]) / d);
        }
        Self { scale, offset }
    }

    pub fn identity(cols: usize) -> Self {
        Self {
            scale: vec![1.0; cols],
            offset: vec![0.0; cols],
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn transform(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.dim(), "scaler width mismatch");
        let mut out = x.clone();
        for r in 0..out.rows {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.scale[c] * *v + self.offset[c];
            }
        }
        out
    }

    pub fn inverse(&self, y: &Mat) -> Mat {
        assert_eq!(y.cols, self.dim(), "scaler width mismatch");
        let mut out = y.clone();
        for r in 0..out.rows {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.offset[c]) / self.scale[c];
            }
        }
        out
    }
}
