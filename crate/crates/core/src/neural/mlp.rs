use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    pub(crate) fn tag(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::Relu => 2,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Dense network parameters stored in one flat buffer.
///
/// Layer `l` occupies a row-major `(dims[l], dims[l + 1])` weight block followed
/// by a bias of length `dims[l + 1]`, so the forward map of a batch `x` is
/// `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    dims: Vec<usize>,
    activation: Activation,
    data: Vec<f64>,
    version: u64,
}

/// Layer inputs retained by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    version: u64,
    dims: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct MlpGradients {
    /// Same layout as the parameter buffer.
    pub params: Vec<f64>,
    pub input: Array2<f64>,
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::config(format!("invalid layer dimensions {dims:?}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            activation,
            data: vec![0.0; param_count(dims)],
            version: 0,
        })
    }

    pub fn from_parts(dims: &[usize], activation: Activation, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(dims, activation)?;
        if data.len() != p.data.len() {
            return Err(Error::Dimension {
                expected: p.data.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        p.data = data;
        Ok(p)
    }

    /// Orthogonal weights scaled by `hidden_gain` (hidden layers) and
    /// `output_gain` (last layer); zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(
        dims: &[usize],
        activation: Activation,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(dims, activation)?;
        let layers = p.num_layers();
        for l in 0..layers {
            let gain = if l + 1 == layers { output_gain } else { hidden_gain };
            let w = orthogonal_matrix(dims[l], dims[l + 1], rng);
            p.weight_mut(l).assign(&(w * gain));
        }
        Ok(p)
    }

    /// Policy network: hidden widths `hidden`, linear logits, small output gain.
    pub fn actor<R: Rng + ?Sized>(input: usize, hidden: &[usize], actions: usize, rng: &mut R) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(input).chain(hidden.iter().copied()).chain([actions]).collect();
        Self::orthogonal(&dims, Activation::Tanh, std::f64::consts::SQRT_2, 0.01, rng)
    }

    /// Value network with a single linear output.
    pub fn critic<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let dims: Vec<usize> = std::iter::once(input).chain(hidden.iter().copied()).chain([1]).collect();
        Self::orthogonal(&dims, Activation::Tanh, std::f64::consts::SQRT_2, 1.0, rng)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
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

    /// Mutable access to the flat buffer. Invalidates outstanding caches.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.data
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.dims[..=layer])
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let off = self.offset(layer);
        ArrayView2::from_shape((i, o), &self.data[off..off + i * o]).expect("layout")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let off = self.offset(layer) + i * o;
        ArrayView1::from(&self.data[off..off + o])
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let off = self.offset(layer);
        self.version += 1;
        ArrayViewMut2::from_shape((i, o), &mut self.data[off..off + i * o]).expect("layout")
    }

    pub fn bias_mut(&mut self, layer: usize) -> ArrayViewMut1<'_, f64> {
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        let off = self.offset(layer) + i * o;
        self.version += 1;
        ArrayViewMut1::from(&mut self.data[off..off + o])
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass; one sample per row.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut h = x.to_owned();
        for l in 0..layers {
            let mut z = h.dot(&self.weight(l));
            z += &self.bias(l);
            if l + 1 < layers {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            inputs.push(h);
            h = z;
        }
        let cache = ForwardCache {
            inputs,
            version: self.version,
            dims: self.dims.clone(),
        };
        Ok((h, cache))
    }

    /// Forward pass without keeping a cache.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let layers = self.num_layers();
        let mut h = x.to_owned();
        for l in 0..layers {
            let mut z = h.dot(&self.weight(l));
            z += &self.bias(l);
            if l + 1 < layers {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        Ok(h)
    }

    /// Reverse-mode gradients of `sum(grad_out ⊙ output)` with respect to
    /// every parameter and the input.
    pub fn gradient(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> Result<MlpGradients> {
        if cache.version != self.version || cache.dims != self.dims {
            return Err(Error::StaleCache);
        }
        let batch = cache.inputs[0].nrows();
        if grad_out.dim() != (batch, self.output_dim()) {
            return Err(Error::Dimension {
                expected: batch * self.output_dim(),
                got: grad_out.len(),
            });
        }
        let mut grads = vec![0.0; self.data.len()];
        let mut g = grad_out.to_owned();
        for l in (0..self.num_layers()).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let off = self.offset(l);
            let input = &cache.inputs[l];
            {
                let mut gw = ArrayViewMut2::from_shape((i, o), &mut grads[off..off + i * o]).expect("layout");
                ndarray::linalg::general_mat_mul(1.0, &input.t(), &g, 0.0, &mut gw);
            }
            let gb = g.sum_axis(Axis(0));
            grads[off + i * o..off + i * o + o].copy_from_slice(gb.as_slice().expect("contiguous"));
            let mut g_in = g.dot(&self.weight(l).t());
            if l > 0 {
                let act = self.activation;
                g_in.zip_mut_with(input, |gi, &y| *gi *= act.derivative_from_output(y));
            }
            g = g_in;
        }
        Ok(MlpGradients { params: grads, input: g })
    }
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is fewer).
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let (n, k) = (rows.max(cols), rows.min(cols));
    // Columns of `q` are orthonormalised with modified Gram-Schmidt.
    let mut q = Array2::<f64>::from_shape_fn((n, k), |_| rng.sample(StandardNormal));
    for j in 0..k {
        for p in 0..j {
            let proj = q.column(p).dot(&q.column(j));
            let prev = q.column(p).to_owned();
            q.column_mut(j).scaled_add(-proj, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-12 {
            q.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    if rows >= cols {
        q
    } else {
        q.t().to_owned()
    }
}

/// Straightforward per-sample evaluation, used to cross-check the batched path.
#[doc(hidden)]
pub fn forward_reference(p: &MlpParams, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for l in 0..p.num_layers() {
        let w = p.weight(l);
        let b = p.bias(l);
        let mut z: Vec<f64> = (0..w.ncols())
            .map(|o| b[o] + (0..w.nrows()).map(|i| h[i] * w[[i, o]]).sum::<f64>())
            .collect();
        if l + 1 < p.num_layers() {
            z.iter_mut().for_each(|v| *v = p.activation.apply(*v));
        }
        h = z;
    }
    h
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.inputs[0].nrows()
    }

    /// Network input rows retained by the pass.
    pub fn input(&self) -> ArrayView2<'_, f64> {
        self.inputs[0].slice(s![.., ..])
    }
}
