//! Fully connected layers with hand-derived gradients, Glorot initialization
//! and the Adam optimizer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" | "linear" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform Glorot initialization in `±sqrt(6 / (in_dim + out_dim))`.
pub fn glorot_init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> DenseMatrix {
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    DenseMatrix::from_fn(in_dim, out_dim, |_, _| rng.random_range(-bound..=bound))
}

/// `activation(input · weight + bias)`; the bias is absent for graph convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
    pub activation: Activation,
}

/// Gradients of one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &LinearLayer) -> Self {
        Self {
            weight: DenseMatrix::zeros(layer.in_dim(), layer.out_dim()),
            bias: layer.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn accumulate(&mut self, other: &LayerGrads) -> Result<()> {
        self.weight.add_scaled(&other.weight, 1.0)?;
        if let (Some(a), Some(b)) = (self.bias.as_mut(), other.bias.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().flatten().all(|v| v.is_finite())
    }
}

impl LinearLayer {
    /// Glorot-initialized weights and zero bias.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        with_bias: bool,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: glorot_init(in_dim, out_dim, rng),
            bias: with_bias.then(|| vec![0.0; out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn forward(&self, input: &DenseMatrix) -> Result<DenseMatrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::shape(
                "linear_forward",
                format!("input has {} columns, layer expects {}", input.cols(), self.in_dim()),
            ));
        }
        let mut out = input.matmul(&self.weight)?;
        let act = self.activation;
        let bias = self.bias.as_deref();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            if let Some(b) = bias {
                for (v, bj) in row.iter_mut().zip(b) {
                    *v += bj;
                }
            }
            for v in row.iter_mut() {
                *v = act.apply(*v);
            }
        }
        Ok(out)
    }

    /// Backward pass given the forward output. Returns the parameter gradients
    /// and the gradient with respect to `input`.
    pub fn backward_with_output(
        &self,
        input: &DenseMatrix,
        output: &DenseMatrix,
        upstream: &DenseMatrix,
    ) -> Result<(LayerGrads, DenseMatrix)> {
        let delta = self.pre_activation_grad(input, output, upstream)?;
        let grad_input = delta.matmul_nt(&self.weight)?;
        Ok((self.param_grads(input, &delta)?, grad_input))
    }

    /// Like [`Self::backward_with_output`] but skips the input gradient, for the
    /// first layer of a stack.
    pub fn backward_params_only(
        &self,
        input: &DenseMatrix,
        output: &DenseMatrix,
        upstream: &DenseMatrix,
    ) -> Result<LayerGrads> {
        let delta = self.pre_activation_grad(input, output, upstream)?;
        self.param_grads(input, &delta)
    }

    /// Backward pass that recomputes the forward output.
    pub fn backward(
        &self,
        input: &DenseMatrix,
        upstream: &DenseMatrix,
    ) -> Result<(LayerGrads, DenseMatrix)> {
        let output = self.forward(input)?;
        self.backward_with_output(input, &output, upstream)
    }

    fn pre_activation_grad(
        &self,
        input: &DenseMatrix,
        output: &DenseMatrix,
        upstream: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        let expect = (input.rows(), self.out_dim());
        if input.cols() != self.in_dim() || output.shape() != expect || upstream.shape() != expect {
            return Err(Error::shape(
                "linear_backward",
                format!(
                    "input {:?}, output {:?}, upstream {:?} for a {}->{} layer",
                    input.shape(),
                    output.shape(),
                    upstream.shape(),
                    self.in_dim(),
                    self.out_dim()
                ),
            ));
        }
        let act = self.activation;
        let mut delta = upstream.clone();
        if act != Activation::Identity {
            for (d, &y) in delta.data_mut().iter_mut().zip(output.data()) {
                *d *= act.derivative_from_output(y);
            }
        }
        Ok(delta)
    }

    fn param_grads(&self, input: &DenseMatrix, delta: &DenseMatrix) -> Result<LayerGrads> {
        let weight = input.matmul_tn(delta)?;
        let bias = self.bias.as_ref().map(|_| {
            let mut g = vec![0.0; delta.cols()];
            for r in delta.iter_rows() {
                for (gj, v) in g.iter_mut().zip(r) {
                    *gj += v;
                }
            }
            g
        });
        Ok(LayerGrads { weight, bias })
    }

    /// Mutable views of the parameter buffers in a fixed order (weight, then bias).
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![self.weight.data_mut()];
        if let Some(b) = self.bias.as_mut() {
            v.push(b.as_mut_slice());
        }
        v
    }
}

impl LayerGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![self.weight.data()];
        if let Some(b) = self.bias.as_ref() {
            v.push(b.as_slice());
        }
        v
    }
}

/// Adam with bias correction. Moment buffers are allocated on the first step
/// to match the parameter blocks passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.first, &self.second)
    }

    /// One update over all parameter blocks. `objective` names the loss being
    /// minimized and is reported if a gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], objective: &str) -> Result<()> {
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::shape("adam_step", "gradients not shaped like parameters"));
        }
        if let Some(bad) = grads.iter().flat_map(|g| g.iter()).find(|v| !v.is_finite()) {
            return Err(Error::Training {
                term: objective.to_string(),
                value: *bad,
            });
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != params.len()
            || self.first.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::shape("adam_step", "parameter layout changed between steps"));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
