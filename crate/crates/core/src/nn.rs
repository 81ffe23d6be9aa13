//! Minimal feedforward engine: layered affine + activation networks with
//! exact reverse-mode gradients, an L2 penalty and Adam. Double precision
//! throughout so finite-difference checks have headroom.

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("empty layer size list")]
    EmptySizes,
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("non-finite gradient in layer {layer} ({tensor})")]
    NonFiniteGradient { layer: usize, tensor: &'static str },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Elu,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp() - 1.0
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation value.
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "elu" => Some(Activation::Elu),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// out × in weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    /// Weights ~ N(0, 2/fan_in), biases zero, deterministic per seed.
    pub fn init(sizes: &[usize], acts: &[Activation], seed: u64) -> Result<Self, NnError> {
        if sizes.len() < 2 {
            return Err(NnError::EmptySizes);
        }
        if acts.len() != sizes.len() - 1 {
            return Err(NnError::DimMismatch {
                expected: sizes.len() - 1,
                got: acts.len(),
                context: "activation count",
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (i, win) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (win[0], win[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(&mut rng));
            layers.push(Layer {
                w,
                b: Array1::zeros(fan_out),
                act: acts[i],
            });
        }
        Ok(NetworkParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.raw_dim()),
                    b: Array1::zeros(l.b.raw_dim()),
                    act: l.act,
                })
                .collect(),
        }
    }

    /// self += scale * other, elementwise over all weights and biases.
    pub fn axpy(&mut self, scale: f64, other: &NetworkParams) {
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            l.w.scaled_add(scale, &o.w);
            l.b.scaled_add(scale, &o.b);
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }
}

/// Per-layer pre-activations kept for the backward pass.
pub struct ForwardCache {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

pub fn forward(params: &NetworkParams, batch: &Array2<f64>) -> Result<(Array2<f64>, ForwardCache), NnError> {
    if batch.ncols() != params.input_dim() {
        return Err(NnError::DimMismatch {
            expected: params.input_dim(),
            got: batch.ncols(),
            context: "forward input width",
        });
    }
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post = Vec::with_capacity(params.layers.len());
    let mut cur = batch.clone();
    for layer in &params.layers {
        let mut z = cur.dot(&layer.w.t());
        z += &layer.b;
        let activated = z.mapv(|v| layer.act.apply(v));
        pre.push(z);
        post.push(activated.clone());
        cur = activated;
    }
    Ok((
        cur,
        ForwardCache {
            input: batch.clone(),
            pre,
            post,
        },
    ))
}

/// Exact reverse-mode gradients for the whole stack, plus the gradient with
/// respect to the input batch (used to route the balancing-regularizer
/// gradient into the extractor).
pub fn backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    output_grad: &Array2<f64>,
) -> Result<(NetworkParams, Array2<f64>), NnError> {
    let n_layers = params.layers.len();
    if output_grad.ncols() != params.output_dim() {
        return Err(NnError::DimMismatch {
            expected: params.output_dim(),
            got: output_grad.ncols(),
            context: "backward output width",
        });
    }
    if output_grad.nrows() != cache.input.nrows() {
        return Err(NnError::DimMismatch {
            expected: cache.input.nrows(),
            got: output_grad.nrows(),
            context: "backward batch size",
        });
    }
    let mut grads = params.zeros_like();
    let mut delta = output_grad.clone();
    for i in (0..n_layers).rev() {
        let layer = &params.layers[i];
        // through the activation
        let dz = &delta * &cache.pre[i].mapv(|z| layer.act.grad(z));
        let below = if i == 0 { &cache.input } else { &cache.post[i - 1] };
        grads.layers[i].w = dz.t().dot(below);
        grads.layers[i].b = dz.sum_axis(Axis(0));
        delta = dz.dot(&layer.w);
    }
    Ok((grads, delta))
}

#[derive(Debug, Clone)]
pub struct AdamState {
    m: NetworkParams,
    v: NetworkParams,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &NetworkParams, lr: f64) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Standard bias-corrected Adam update. The caller is responsible for summing
/// loss, regularizer and penalty gradients before this call.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &NetworkParams,
    state: &mut AdamState,
) -> Result<(), NnError> {
    for (li, g) in grads.layers.iter().enumerate() {
        if g.w.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteGradient {
                layer: li,
                tensor: "weight",
            });
        }
        if g.b.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteGradient {
                layer: li,
                tensor: "bias",
            });
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for ((p, g), (m, v)) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        for ((pw, gw), (mw, vw)) in p
            .w
            .iter_mut()
            .zip(g.w.iter())
            .zip(m.w.iter_mut().zip(v.w.iter_mut()))
        {
            *mw = state.beta1 * *mw + (1.0 - state.beta1) * gw;
            *vw = state.beta2 * *vw + (1.0 - state.beta2) * gw * gw;
            *pw -= state.lr * (*mw / bc1) / ((*vw / bc2).sqrt() + state.eps);
        }
        for ((pb, gb), (mb, vb)) in p
            .b
            .iter_mut()
            .zip(g.b.iter())
            .zip(m.b.iter_mut().zip(v.b.iter_mut()))
        {
            *mb = state.beta1 * *mb + (1.0 - state.beta1) * gb;
            *vb = state.beta2 * *vb + (1.0 - state.beta2) * gb * gb;
            *pb -= state.lr * (*mb / bc1) / ((*vb / bc2).sqrt() + state.eps);
        }
    }
    Ok(())
}

/// strength * sum of squared weights (biases exempt) and its gradient.
pub fn l2_penalty(params: &NetworkParams, strength: f64) -> (f64, NetworkParams) {
    let mut grad = params.zeros_like();
    let mut total = 0.0;
    for (l, g) in params.layers.iter().zip(grad.layers.iter_mut()) {
        total += l.w.iter().map(|w| w * w).sum::<f64>();
        g.w = l.w.mapv(|w| 2.0 * strength * w);
    }
    (strength * total, grad)
}
