//! Dense mapper/critic networks with hand-derived reverse-mode gradients and ADAM.
//!
//! All forward passes are batched: inputs are `batch × dim` matrices, one sample
//! per row. Every `*_forward` returns a cache that the matching `*_backward`
//! consumes to produce exact parameter and input gradients.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SLOPE: f64 = 0.2;
pub const DEFAULT_HIDDEN: usize = 512;
/// Critic probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

pub fn leaky_relu(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { slope * v }).collect()
}

fn leaky(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        v
    } else {
        slope * v
    }
}

// Subgradient at zero is the positive-side slope.
fn leaky_grad(v: f64, slope: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log(clamp(sigmoid(z)))` and its derivative in `z`.
pub fn log_prob(z: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if p < PROB_EPS {
        (PROB_EPS.ln(), 0.0)
    } else if p > 1.0 - PROB_EPS {
        ((1.0 - PROB_EPS).ln(), 0.0)
    } else {
        (-softplus(-z), 1.0 - p)
    }
}

/// `log(1 - clamp(sigmoid(z)))` and its derivative in `z`.
pub fn log_one_minus_prob(z: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if p < PROB_EPS {
        ((1.0 - PROB_EPS).ln(), 0.0)
    } else if p > 1.0 - PROB_EPS {
        (PROB_EPS.ln(), 0.0)
    } else {
        (-softplus(z), -p)
    }
}

/// A flat view over every trainable tensor, used by the optimizer and by
/// finite-difference checks.
pub trait ParamSet {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn contiguous<'a, D: ndarray::Dimension>(a: &'a ndarray::Array<f64, D>) -> &'a [f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn contiguous_mut<'a, D: ndarray::Dimension>(a: &'a mut ndarray::Array<f64, D>) -> &'a mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapperVariant {
    Linear,
    Nonlinear,
}

impl std::str::FromStr for MapperVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "nonlinear" => Ok(Self::Nonlinear),
            _ => Err(Error::InvalidArgument(format!("unknown mapper variant `{s}`"))),
        }
    }
}

impl std::fmt::Display for MapperVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Nonlinear => "nonlinear",
        })
    }
}

/// Single-layer map `x -> Wx + b`, optionally followed by a leaky ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct MapperParams {
    pub variant: MapperVariant,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct MapperCache {
    input: Array2<f64>,
    pre: Array2<f64>,
}

impl MapperParams {
    pub fn identity(variant: MapperVariant, dim: usize) -> Self {
        Self {
            variant,
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
            slope: DEFAULT_SLOPE,
        }
    }

    /// Identity weight plus gaussian noise of standard deviation `noise`, zero bias.
    pub fn init(variant: MapperVariant, dim: usize, noise: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::identity(variant, dim);
        if noise > 0.0 {
            let normal = Normal::new(0.0, noise).expect("positive std");
            p.weight.iter_mut().for_each(|w| *w += normal.sample(rng));
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            variant: self.variant,
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
            slope: self.slope,
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// Maps one vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let x = ArrayView1::from(x);
        let pre = self.weight.dot(&x) + &self.bias;
        Ok(match self.variant {
            MapperVariant::Linear => pre.to_vec(),
            MapperVariant::Nonlinear => leaky_relu(pre.as_slice().expect("owned"), self.slope),
        })
    }

    /// Maps every row of `x`.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward_cached(x).map(|(y, _)| y)
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MapperCache)> {
        self.check_dim(x.ncols())?;
        let pre = x.dot(&self.weight.t()) + &self.bias;
        let out = match self.variant {
            MapperVariant::Linear => pre.clone(),
            MapperVariant::Nonlinear => pre.mapv(|v| leaky(v, self.slope)),
        };
        Ok((
            out,
            MapperCache {
                input: x.clone(),
                pre,
            },
        ))
    }

    /// Parameter gradients and input gradient given `d loss / d output`.
    pub fn backward(&self, cache: &MapperCache, grad_out: &Array2<f64>) -> (MapperParams, Array2<f64>) {
        let grad_pre = match self.variant {
            MapperVariant::Linear => grad_out.clone(),
            MapperVariant::Nonlinear => {
                let mut g = grad_out.clone();
                g.zip_mut_with(&cache.pre, |g, &p| *g *= leaky_grad(p, self.slope));
                g
            }
        };
        let grads = MapperParams {
            variant: self.variant,
            weight: grad_pre.t().dot(&cache.input),
            bias: grad_pre.sum_axis(Axis(0)),
            slope: self.slope,
        };
        let grad_in = grad_pre.dot(&self.weight);
        (grads, grad_in)
    }
}

impl ParamSet for MapperParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![contiguous(&self.weight), contiguous(&self.bias)]
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![contiguous_mut(&mut self.weight), contiguous_mut(&mut self.bias)]
    }
}

/// Two-layer classifier `sigmoid(w2 · leaky(W1 x + b1) + b2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
    pub slope: f64,
}

#[derive(Clone, Debug)]
pub struct CriticCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array1<f64>,
}

impl CriticCache {
    pub fn logits(&self) -> &Array1<f64> {
        &self.logits
    }
}

impl CriticParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, dim)),
            b1: Array1::zeros(hidden),
            w2: Array1::zeros(hidden),
            b2: 0.0,
            slope: DEFAULT_SLOPE,
        }
    }

    /// Gaussian weights of standard deviation `std`, zero biases.
    pub fn init(dim: usize, hidden: usize, std: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(dim, hidden);
        let normal = Normal::new(0.0, std).expect("positive std");
        p.w1.iter_mut().for_each(|w| *w = normal.sample(rng));
        p.w2.iter_mut().for_each(|w| *w = normal.sample(rng));
        p
    }

    pub fn dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            slope: self.slope,
            ..Self::zeros(self.dim(), self.hidden())
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    /// Probability that `x` is a real sample, clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let pre = self.w1.dot(&ArrayView1::from(x)) + &self.b1;
        let z = pre.iter().zip(&self.w2).map(|(&h, w)| leaky(h, self.slope) * w).sum::<f64>() + self.b2;
        Ok(sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS))
    }

    /// Logits for every row of `x`, with the cache for [`CriticParams::backward`].
    pub fn forward_cached(&self, x: &Array2<f64>) -> Result<CriticCache> {
        self.check_dim(x.ncols())?;
        let pre = x.dot(&self.w1.t()) + &self.b1;
        let hidden = pre.mapv(|v| leaky(v, self.slope));
        let logits = hidden.dot(&self.w2) + self.b2;
        Ok(CriticCache {
            input: x.clone(),
            pre,
            hidden,
            logits,
        })
    }

    /// Given `d loss / d logit` per row, returns parameter gradients (when
    /// `want_params`) and the gradient with respect to the input rows.
    pub fn backward(
        &self,
        cache: &CriticCache,
        grad_logits: &Array1<f64>,
        want_params: bool,
    ) -> (Option<CriticParams>, Array2<f64>) {
        let b = grad_logits.len();
        let grad_hidden = grad_logits
            .view()
            .into_shape_with_order((b, 1))
            .expect("column")
            .dot(&self.w2.view().into_shape_with_order((1, self.hidden())).expect("row"));
        let mut grad_pre = grad_hidden;
        grad_pre.zip_mut_with(&cache.pre, |g, &p| *g *= leaky_grad(p, self.slope));
        let grad_in = grad_pre.dot(&self.w1);
        let grads = want_params.then(|| CriticParams {
            w1: grad_pre.t().dot(&cache.input),
            b1: grad_pre.sum_axis(Axis(0)),
            w2: cache.hidden.t().dot(grad_logits),
            b2: grad_logits.sum(),
            slope: self.slope,
        });
        (grads, grad_in)
    }
}

impl ParamSet for CriticParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            contiguous(&self.w1),
            contiguous(&self.b1),
            contiguous(&self.w2),
            std::slice::from_ref(&self.b2),
        ]
    }
    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            contiguous_mut(&mut self.w1),
            contiguous_mut(&mut self.b1),
            contiguous_mut(&mut self.w2),
            std::slice::from_mut(&mut self.b2),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected ADAM moments for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &impl ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.slices();
        let ps = params.slices_mut();
        if gs.len() != ps.len()
            || gs.len() != self.first_moment.len()
            || gs.iter().zip(&ps).zip(&self.first_moment).any(|((g, p), m)| g.len() != p.len() || g.len() != m.len())
        {
            return Err(Error::ShapeMismatch("gradient and parameter shapes differ".into()));
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(&mut self.first_moment).zip(&mut self.second_moment) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Serialized tensor with its shape header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn matrix(a: &Array2<f64>) -> Self {
        Self {
            shape: a.shape().to_vec(),
            data: a.iter().copied().collect(),
        }
    }

    fn vector(a: &Array1<f64>) -> Self {
        Self {
            shape: vec![a.len()],
            data: a.to_vec(),
        }
    }

    fn to_matrix(&self) -> Result<Array2<f64>> {
        match self.shape[..] {
            [r, c] => Array2::from_shape_vec((r, c), self.data.clone())
                .map_err(|e| Error::Format(format!("tensor shape: {e}"))),
            _ => Err(Error::Format(format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    fn to_vector(&self) -> Result<Array1<f64>> {
        match self.shape[..] {
            [n] if n == self.data.len() => Ok(Array1::from(self.data.clone())),
            _ => Err(Error::Format(format!("expected a vector, got shape {:?}", self.shape))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapperRecord {
    pub variant: MapperVariant,
    pub slope: f64,
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticRecord {
    pub slope: f64,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: f64,
}

impl From<&MapperParams> for MapperRecord {
    fn from(p: &MapperParams) -> Self {
        Self {
            variant: p.variant,
            slope: p.slope,
            weight: Tensor::matrix(&p.weight),
            bias: Tensor::vector(&p.bias),
        }
    }
}

impl TryFrom<&MapperRecord> for MapperParams {
    type Error = Error;
    fn try_from(r: &MapperRecord) -> Result<Self> {
        let p = Self {
            variant: r.variant,
            slope: r.slope,
            weight: r.weight.to_matrix()?,
            bias: r.bias.to_vector()?,
        };
        if p.weight.nrows() != p.dim() || p.weight.ncols() != p.dim() {
            return Err(Error::Format("mapper weight must be square and match the bias".into()));
        }
        Ok(p)
    }
}

impl From<&CriticParams> for CriticRecord {
    fn from(p: &CriticParams) -> Self {
        Self {
            slope: p.slope,
            w1: Tensor::matrix(&p.w1),
            b1: Tensor::vector(&p.b1),
            w2: Tensor::vector(&p.w2),
            b2: p.b2,
        }
    }
}

impl TryFrom<&CriticRecord> for CriticParams {
    type Error = Error;
    fn try_from(r: &CriticRecord) -> Result<Self> {
        let p = Self {
            slope: r.slope,
            w1: r.w1.to_matrix()?,
            b1: r.b1.to_vector()?,
            w2: r.w2.to_vector()?,
            b2: r.b2,
        };
        if p.b1.len() != p.hidden() || p.w2.len() != p.hidden() || p.hidden() == 0 {
            return Err(Error::Format("critic tensor shapes disagree".into()));
        }
        Ok(p)
    }
}
