//! Model definitions and losses: the conditional-mean model g, the
//! single-head scorer with a shared feature-action extractor, the combined
//! soft cross-entropy + MSE loss, and the baselines (ridge, S-DNN, M-DNN,
//! CFRNet).

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::ObservationalDataset;
use crate::nn::{
    adam_step, backward, forward, Activation, AdamState, NetworkParams, NnError,
};

pub const HIDDEN_WIDTH: usize = 64;
pub const REPR_WIDTH: usize = 10;

/// Loss weighting: beta trades the classification risk against the MSE,
/// alpha scales the representation balancing regularizer.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    pub beta: f64,
    pub alpha: f64,
    pub l2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            beta: 0.5,
            alpha: 0.0,
            l2: 1e-4,
        }
    }
}

pub fn concat_features_actions(x: &Array2<f64>, a: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), x.view(), a.view()]
}

/// Single-head scorer f(x,a): a shared extractor over the concatenated
/// feature-action input (four layers down to a width-10 representation)
/// followed by a three-layer hypothesis.
#[derive(Debug, Clone)]
pub struct RMNetModel {
    pub extractor: NetworkParams,
    pub hypothesis: NetworkParams,
}

impl RMNetModel {
    pub fn new(d: usize, m: usize, seed: u64) -> Self {
        let h = HIDDEN_WIDTH;
        let extractor = NetworkParams::init(
            &[d + m, h, h, h, REPR_WIDTH],
            &[Activation::Elu; 4],
            seed,
        )
        .unwrap();
        let hypothesis = NetworkParams::init(
            &[REPR_WIDTH, h, h, 1],
            &[Activation::Elu, Activation::Elu, Activation::Identity],
            seed.wrapping_add(1),
        )
        .unwrap();
        RMNetModel {
            extractor,
            hypothesis,
        }
    }

    /// Width-10 representation phi(x, a).
    pub fn repr(&self, x: &Array2<f64>, a: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let input = concat_features_actions(x, a);
        Ok(forward(&self.extractor, &input)?.0)
    }

    pub fn score(&self, x: &Array2<f64>, a: &Array2<f64>) -> Result<Array1<f64>, NnError> {
        let phi = self.repr(x, a)?;
        let (out, _) = forward(&self.hypothesis, &phi)?;
        Ok(out.column(0).to_owned())
    }
}

/// Shared extractor on x with one hypothesis head per action.
#[derive(Debug, Clone)]
pub struct MultiHeadModel {
    pub extractor: NetworkParams,
    pub heads: Vec<NetworkParams>,
}

impl MultiHeadModel {
    pub fn new(d: usize, m: usize, seed: u64) -> Self {
        let h = HIDDEN_WIDTH;
        let extractor = NetworkParams::init(
            &[d, h, h, h, REPR_WIDTH],
            &[Activation::Elu; 4],
            seed,
        )
        .unwrap();
        let heads = (0..(1usize << m))
            .map(|j| {
                NetworkParams::init(
                    &[REPR_WIDTH, h, h, 1],
                    &[Activation::Elu, Activation::Elu, Activation::Identity],
                    seed.wrapping_add(1).wrapping_add(j as u64),
                )
                .unwrap()
            })
            .collect();
        MultiHeadModel { extractor, heads }
    }

    pub fn repr(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        Ok(forward(&self.extractor, x)?.0)
    }

    pub fn score(&self, x: &Array2<f64>, a: &Array2<f64>) -> Result<Array1<f64>, NnError> {
        let phi = self.repr(x)?;
        let mut out = Array1::zeros(x.nrows());
        for i in 0..x.nrows() {
            let idx = action_index(a.row(i));
            let (o, _) = forward(&self.heads[idx], &phi.row(i).insert_axis(Axis(0)).to_owned())?;
            out[i] = o[[0, 0]];
        }
        Ok(out)
    }
}

pub fn action_index(a: ndarray::ArrayView1<f64>) -> usize {
    a.iter()
        .enumerate()
        .map(|(b, &v)| if v > 0.5 { 1 << b } else { 0 })
        .sum()
}

/// Conditional-mean model g(x) of the observational outcome.
#[derive(Debug, Clone)]
pub struct GModel {
    pub net: NetworkParams,
}

impl GModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array1<f64>, NnError> {
        Ok(forward(&self.net, x)?.0.column(0).to_owned())
    }
}

/// Fit g by Adam on the factual squared error, early stopping on the
/// validation factual MSE. Frozen thereafter.
pub fn fit_g(train: &ObservationalDataset, val: &ObservationalDataset, seed: u64) -> Result<GModel, NnError> {
    let d = train.x.ncols();
    let h = HIDDEN_WIDTH;
    let mut net = if std::env::var("G_LINEAR").is_ok() {
        // TEMP experiment knob
        NetworkParams::init(&[d, 1], &[Activation::Identity], seed)?
    } else {
        NetworkParams::init(
            &[d, h, h, 1],
            &[Activation::Elu, Activation::Elu, Activation::Identity],
            seed,
        )?
    };
    let mut adam = AdamState::new(&net, 1e-3);
    let batch = 64usize.min(train.len().max(2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let val_mse = |net: &NetworkParams| -> Result<f64, NnError> {
        let (out, _) = forward(net, &val.x)?;
        let pred = out.column(0);
        Ok(pred
            .iter()
            .zip(val.y.iter())
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / val.y.len().max(1) as f64)
    };
    let mut best = (f64::INFINITY, net.clone());
    let mut since_best = 0usize;
    for _epoch in 0..200 {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = take_rows(&train.x, chunk);
            let yb: Array1<f64> = chunk.iter().map(|&i| train.y[i]).collect();
            let (out, cache) = forward(&net, &xb)?;
            let n = chunk.len() as f64;
            let dloss = Array2::from_shape_fn((chunk.len(), 1), |(i, _)| {
                2.0 * (out[[i, 0]] - yb[i]) / n
            });
            let (grads, _) = backward(&net, &cache, &dloss)?;
            adam_step(&mut net, &grads, &mut adam)?;
        }
        let mse = if val.is_empty() {
            // fall back to training loss when no validation rows exist
            let (out, _) = forward(&net, &train.x)?;
            out.column(0)
                .iter()
                .zip(train.y.iter())
                .map(|(p, y)| (p - y).powi(2))
                .sum::<f64>()
                / train.len() as f64
        } else {
            val_mse(&net)?
        };
        if mse < best.0 {
            best = (mse, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 20 {
                break;
            }
        }
    }
    Ok(GModel { net: best.1 })
}

pub fn take_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), x.ncols()), |(i, j)| x[[idx[i], j]])
}

const SIGMOID_CLAMP: f64 = 30.0;

fn sigmoid(t: f64) -> f64 {
    let t = t.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-t).exp())
}

/// log(1 + e^t), stable for large |t|.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Soft cross-entropy against the residual soft-label: with
/// s = sigmoid(y - g) and v = sigmoid(f - g), the loss is
/// -[s log v + (1-s) log(1-v)] and its f-gradient is v - s.
/// Minimized per instance at f = y regardless of g.
pub fn soft_xe_loss(f_value: f64, y: f64, g_value: f64) -> (f64, f64) {
    let u = (f_value - g_value).clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    let s = sigmoid(y - g_value);
    // -[s log v + (1-s) log(1-v)] = s*softplus(-u) + (1-s)*softplus(u)
    let loss = s * softplus(-u) + (1.0 - s) * softplus(u);
    let grad = sigmoid(u) - s;
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct CombinedLoss {
    pub total: f64,
    pub xe: f64,
    pub mse: f64,
    /// d total / d f per instance (batch-mean convention folded in).
    pub df: Array1<f64>,
}

/// beta * mean(soft-XE) + (1-beta) * mean((y-f)^2) over the batch.
/// Gradients flow to f only; g values are treated as constants.
pub fn combined_loss(
    f_values: &Array1<f64>,
    y: &Array1<f64>,
    g_values: &Array1<f64>,
    beta: f64,
) -> Result<CombinedLoss, NnError> {
    let n = f_values.len();
    if n == 0 {
        return Err(NnError::DimMismatch {
            expected: 1,
            got: 0,
            context: "combined_loss batch",
        });
    }
    let mut xe = 0.0;
    let mut mse = 0.0;
    let mut df = Array1::zeros(n);
    for i in 0..n {
        let (l, g) = soft_xe_loss(f_values[i], y[i], g_values[i]);
        xe += l;
        mse += (y[i] - f_values[i]).powi(2);
        df[i] = (beta * g + (1.0 - beta) * 2.0 * (f_values[i] - y[i])) / n as f64;
    }
    xe /= n as f64;
    mse /= n as f64;
    Ok(CombinedLoss {
        total: beta * xe + (1.0 - beta) * mse,
        xe,
        mse,
        df,
    })
}

/// Closed-form ridge regression on [x; a; 1] with an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub weights: Array1<f64>,
}

pub fn ridge_fit(train: &ObservationalDataset, lambda: f64) -> RidgeModel {
    let n = train.len();
    let d = train.x.ncols();
    let m = train.a_obs.ncols();
    let p = d + m + 1;
    let mut z = Array2::ones((n, p));
    z.slice_mut(ndarray::s![.., ..d]).assign(&train.x);
    z.slice_mut(ndarray::s![.., d..d + m]).assign(&train.a_obs);
    let mut gram = z.t().dot(&z);
    for i in 0..p - 1 {
        gram[[i, i]] += lambda; // bias column unpenalized
    }
    let rhs = z.t().dot(&train.y);
    let weights = solve_linear(gram, rhs).expect("ridge system is positive definite for lambda > 0");
    RidgeModel { weights }
}

impl RidgeModel {
    pub fn score(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array1<f64> {
        let d = x.ncols();
        let m = a.ncols();
        assert_eq!(self.weights.len(), d + m + 1, "ridge dimension mismatch");
        let mut out = Array1::zeros(x.nrows());
        for i in 0..x.nrows() {
            let mut v = self.weights[d + m];
            for j in 0..d {
                v += self.weights[j] * x[[i, j]];
            }
            for j in 0..m {
                v += self.weights[d + j] * a[[i, j]];
            }
            out[i] = v;
        }
        out
    }
}

/// Gaussian elimination with partial pivoting; None on a singular system.
pub fn solve_linear(mut a: Array2<f64>, mut b: Array1<f64>) -> Option<Array1<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[[i, col]]
                .abs()
                .partial_cmp(&a[[j, col]].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[[pivot, col]].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a[[col, j]];
                a[[col, j]] = a[[pivot, j]];
                a[[pivot, j]] = tmp;
            }
            b.swap(col, pivot);
        }
        for i in col + 1..n {
            let factor = a[[i, col]] / a[[col, col]];
            for j in col..n {
                a[[i, j]] -= factor * a[[col, j]];
            }
            b[i] -= factor * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in i + 1..n {
            acc -= a[[i, j]] * x[j];
        }
        x[i] = acc / a[[i, i]];
    }
    Some(x)
}

/// Anything that can score a feature-action pair; the evaluation harness
/// works through this surface.
pub trait Scorer {
    fn score_batch(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array1<f64>;

    /// n × |A| score matrix by tiling each feature row over all actions.
    fn score_all(&self, x: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        let (n, na) = (x.nrows(), actions.nrows());
        let mut big_x = Array2::zeros((n * na, x.ncols()));
        let mut big_a = Array2::zeros((n * na, actions.ncols()));
        for i in 0..n {
            for j in 0..na {
                big_x.row_mut(i * na + j).assign(&x.row(i));
                big_a.row_mut(i * na + j).assign(&actions.row(j));
            }
        }
        let flat = self.score_batch(&big_x, &big_a);
        Array2::from_shape_fn((n, na), |(i, j)| flat[i * na + j])
    }
}

impl Scorer for RMNetModel {
    fn score_batch(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array1<f64> {
        self.score(x, a).expect("dimension mismatch in scoring")
    }
}

impl Scorer for MultiHeadModel {
    fn score_batch(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array1<f64> {
        self.score(x, a).expect("dimension mismatch in scoring")
    }

    fn score_all(&self, x: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        // One extractor pass, then every head on the whole batch.
        let phi = self.repr(x).expect("dimension mismatch in scoring");
        let mut out = Array2::zeros((x.nrows(), actions.nrows()));
        for j in 0..actions.nrows() {
            let idx = action_index(actions.row(j));
            let (o, _) = forward(&self.heads[idx], &phi).expect("head forward");
            out.column_mut(j).assign(&o.column(0));
        }
        out
    }
}

impl Scorer for RidgeModel {
    fn score_batch(&self, x: &Array2<f64>, a: &Array2<f64>) -> Array1<f64> {
        self.score(x, a)
    }
}

/// A scorer ignoring the input entirely; draws uniform scores from its
/// seed. Used for chance-rate calibration.
pub struct UniformRandomScorer {
    pub seed: u64,
}

impl Scorer for UniformRandomScorer {
    fn score_batch(&self, x: &Array2<f64>, _a: &Array2<f64>) -> Array1<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Array1::from_shape_fn(x.nrows(), |_| rng.gen::<f64>())
    }
}
