//! Single-hidden-layer perceptron with analytic gradients.
//!
//! Weights initialize uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from a
//! seeded ChaCha20 stream, biases start at zero. The training loss is the sum
//! of squared errors divided by the number of rows; `loss_and_gradients`
//! differentiates exactly that quantity, which `max_relative_gradient_error`
//! verifies against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::mat::Mat;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation value itself.
    #[inline]
    fn derivative_from_output(&self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
            Activation::Sigmoid => h * (1.0 - h),
            Activation::Relu => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Gradients in the same shapes as the parameters they belong to.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl Gradients {
    /// Flattens in the same order as [`Mlp::param_vector`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            self.w1.data.len() + self.b1.len() + self.w2.data.len() + self.b2.len(),
        );
        v.extend_from_slice(&self.w1.data);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2.data);
        v.extend_from_slice(&self.b2);
        v
    }
}

/// Two-layer perceptron: `P = W2 act(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub activation: Activation,
    /// Hidden weights, `n_hidden x n_in`.
    pub w1: Mat,
    pub b1: Vec<f64>,
    /// Output weights, `n_out x n_hidden`.
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn new(
        n_in: usize,
        n_hidden: usize,
        n_out: usize,
        activation: Activation,
        init_seed: u64,
    ) -> Self {
        assert!(n_in > 0 && n_hidden > 0 && n_out > 0, "empty layer");
        let mut rng = ChaCha20Rng::seed_from_u64(init_seed);
        let s1 = 1.0 / (n_in as f64).sqrt();
        let w1 = Mat::from_fn(n_hidden, n_in, |_, _| rng.random_range(-s1..s1));
        let s2 = 1.0 / (n_hidden as f64).sqrt();
        let w2 = Mat::from_fn(n_out, n_hidden, |_, _| rng.random_range(-s2..s2));
        Self {
            activation,
            w1,
            b1: vec![0.0; n_hidden],
            w2,
            b2: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.w1.cols
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.rows
    }

    pub fn n_out(&self) -> usize {
        self.w2.rows
    }

    /// Hidden activations for a batch, one row per input row.
    fn hidden(&self, x: &Mat) -> Mat {
        let mut h = x.mul_bt(&self.w1);
        for r in 0..h.rows {
            for (v, b) in h.row_mut(r).iter_mut().zip(&self.b1) {
                *v = self.activation.apply(*v + b);
            }
        }
        h
    }

    fn output_from_hidden(&self, h: &Mat) -> Mat {
        let mut p = h.mul_bt(&self.w2);
        for r in 0..p.rows {
            for (v, b) in p.row_mut(r).iter_mut().zip(&self.b2) {
                *v += b;
            }
        }
        p
    }

    /// Batch prediction; `x` is `rows x n_in`, the result `rows x n_out`.
    pub fn forward(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.n_in(), "input width mismatch");
        let h = self.hidden(x);
        self.output_from_hidden(&h)
    }

    /// Sum of squared errors over the batch divided by the row count.
    pub fn loss(&self, x: &Mat, y: &Mat) -> f64 {
        let p = self.forward(x);
        sum_sq_diff(&p, y) / x.rows as f64
    }

    /// Loss and its exact gradient for one batch.
    pub fn loss_and_gradients(&self, x: &Mat, y: &Mat) -> (f64, Gradients) {
        assert_eq!(x.rows, y.rows, "batch row mismatch");
        assert_eq!(y.cols, self.n_out(), "target width mismatch");
        let h = self.hidden(x);
        let p = self.output_from_hidden(&h);
        let inv_rows = 1.0 / x.rows as f64;

        // d2 = dL/dP for L = sum((P - Y)^2) / rows.
        let mut d2 = Mat::zeros(p.rows, p.cols);
        let mut loss = 0.0;
        for i in 0..p.data.len() {
            let e = p.data[i] - y.data[i];
            loss += e * e;
            d2.data[i] = 2.0 * e * inv_rows;
        }
        loss *= inv_rows;

        let gw2 = d2.at_b(&h);
        let gb2 = d2.col_sums();

        // Back through the hidden layer: dh = (d2 W2) .* act'(H).
        let mut dh = d2.matmul(&self.w2);
        for i in 0..dh.data.len() {
            dh.data[i] *= self.activation.derivative_from_output(h.data[i]);
        }
        let gw1 = dh.at_b(x);
        let gb1 = dh.col_sums();

        (
            loss,
            Gradients {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
            },
        )
    }

    /// All parameters flattened: `w1`, `b1`, `w2`, `b2` in row-major order.
    pub fn param_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.w1.data);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2.data);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn param_count(&self) -> usize {
        self.w1.data.len() + self.b1.len() + self.w2.data.len() + self.b2.len()
    }

    /// Restores parameters from a flat vector laid out like
    /// [`Mlp::param_vector`].
    pub fn set_param_vector(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.param_count(), "parameter count mismatch");
        let (n1, nb1, n2) = (self.w1.data.len(), self.b1.len(), self.w2.data.len());
        let mut o = 0;
        self.w1.data.copy_from_slice(&v[o..o + n1]);
        o += n1;
        self.b1.copy_from_slice(&v[o..o + nb1]);
        o += nb1;
        self.w2.data.copy_from_slice(&v[o..o + n2]);
        o += n2;
        self.b2.copy_from_slice(&v[o..]);
    }

    /// Worst relative disagreement between analytic gradients and central
    /// finite differences with the given step, over every parameter.
    pub fn max_relative_gradient_error(&self, x: &Mat, y: &Mat, step: f64) -> f64 {
        let (_, grads) = self.loss_and_gradients(x, y);
        let analytic = grads.to_vec();
        let base = self.param_vector();
        let mut probe = self.clone();
        let mut worst = 0.0f64;
        for (k, &ana) in analytic.iter().enumerate() {
            let mut params = base.clone();
            params[k] = base[k] + step;
            probe.set_param_vector(&params);
            let lp = probe.loss(x, y);
            params[k] = base[k] - step;
            probe.set_param_vector(&params);
            let lm = probe.loss(x, y);
            let num = (lp - lm) / (2.0 * step);
            let denom = num.abs().max(ana.abs()).max(1e-6);
            worst = worst.max((num - ana).abs() / denom);
        }
        worst
    }
}

fn sum_sq_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.cols, b.cols);
    a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}
