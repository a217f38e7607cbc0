//! Dense tanh networks with a categorical or scalar head.
//!
//! Parameters live in one flat vector. Layer `l` stores its weights row-major
//! as `(fan_out x fan_in)` followed by `fan_out` biases. The fast forward pass
//! and the [`tape::Tape`] forward pass share the same kernels, so a log-prob
//! recomputed on the tape is bit-identical to the one recorded at rollout.

mod adam;
mod checkpoint;
pub mod tape;

pub use adam::AdamState;
pub use checkpoint::{load_params, read_params, save_params, write_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tape::{ParamId, Tape, Var};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];
pub const POLICY_HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    /// `n_heads` independent categoricals over `n_actions` each.
    Categorical { n_heads: usize, n_actions: usize },
    Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub head: Head,
}

impl MlpSpec {
    pub fn policy(input_dim: usize, n_actions: usize) -> Self {
        Self::joint_policy(input_dim, 1, n_actions)
    }

    pub fn joint_policy(input_dim: usize, n_heads: usize, n_actions: usize) -> Self {
        Self {
            input_dim,
            hidden: DEFAULT_HIDDEN.to_vec(),
            head: Head::Categorical { n_heads, n_actions },
        }
    }

    pub fn value(input_dim: usize) -> Self {
        Self { input_dim, hidden: DEFAULT_HIDDEN.to_vec(), head: Head::Scalar }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn output_dim(&self) -> usize {
        match self.head {
            Head::Categorical { n_heads, n_actions } => n_heads * n_actions,
            Head::Scalar => 1,
        }
    }

    /// `(fan_in, fan_out)` per layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim()));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.input_dim == 0 {
            return Err(NnError::InvalidSpec("input_dim must be >= 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(NnError::InvalidSpec("hidden widths must be >= 1".into()));
        }
        if let Head::Categorical { n_heads, n_actions } = self.head {
            if n_heads == 0 || n_actions == 0 {
                return Err(NnError::InvalidSpec("categorical head needs >= 1 head and action".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let b = self.offset + self.fan_in * self.fan_out;
        b..b + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    spec: MlpSpec,
    layers: Vec<LayerShape>,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in spec.layer_dims() {
            layers.push(LayerShape { fan_in, fan_out, offset });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Self { spec: spec.clone(), layers, values: vec![0.0; offset] })
    }

    pub fn from_values(spec: &MlpSpec, values: Vec<f64>) -> Result<Self, NnError> {
        let mut p = Self::zeros(spec)?;
        if values.len() != p.values.len() {
            return Err(NnError::Contract(format!(
                "expected {} parameters, got {}",
                p.values.len(),
                values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.values[self.layers[layer].weight_range()]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.values[self.layers[layer].bias_range()]
    }
}

/// Glorot-uniform weights, zero biases, and a shrunken final layer for
/// categorical heads.
pub fn init_params(spec: &MlpSpec, seed: u64) -> Result<ParamVector, NnError> {
    let mut p = ParamVector::zeros(spec)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let last = p.layers.len() - 1;
    for (l, shape) in p.layers.clone().iter().enumerate() {
        let limit = (6.0 / (shape.fan_in + shape.fan_out) as f64).sqrt();
        let scale = match spec.head {
            Head::Categorical { .. } if l == last => POLICY_HEAD_INIT_SCALE,
            _ => 1.0,
        };
        for w in &mut p.values[shape.weight_range()] {
            *w = rng.random_range(-limit..limit) * scale;
        }
    }
    Ok(p)
}

pub(crate) fn affine_rows(w: &[f64], b: &[f64], x: &[f64], rows: usize, fan_in: usize, fan_out: usize, y: &mut [f64]) {
    for r in 0..rows {
        let xr = &x[r * fan_in..(r + 1) * fan_in];
        let yr = &mut y[r * fan_out..(r + 1) * fan_out];
        for o in 0..fan_out {
            let wr = &w[o * fan_in..(o + 1) * fan_in];
            let mut acc = b[o];
            for i in 0..fan_in {
                acc += wr[i] * xr[i];
            }
            yr[o] = acc;
        }
    }
}

pub(crate) fn tanh_in_place(x: &mut [f64]) {
    for v in x {
        *v = v.tanh();
    }
}

/// Log-softmax over consecutive groups of `n` entries.
pub(crate) fn log_softmax_groups(x: &[f64], n: usize, out: &mut [f64]) {
    for (xg, og) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        let max = xg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = xg.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        for (o, v) in og.iter_mut().zip(xg) {
            *o = v - lse;
        }
    }
}

/// Raw network outputs for a row-major `rows x input_dim` batch.
pub fn forward_batch(params: &ParamVector, x: &[f64], rows: usize) -> Result<Vec<f64>, NnError> {
    let spec = &params.spec;
    if x.len() != rows * spec.input_dim {
        return Err(NnError::Contract(format!(
            "input length {} != {} x {}",
            x.len(),
            rows,
            spec.input_dim
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(NnError::NonFinite("network input"));
    }
    let mut cur = x.to_vec();
    let last = params.layers.len() - 1;
    for (l, shape) in params.layers.iter().enumerate() {
        let mut next = vec![0.0; rows * shape.fan_out];
        affine_rows(params.weights(l), params.bias(l), &cur, rows, shape.fan_in, shape.fan_out, &mut next);
        if l < last {
            tanh_in_place(&mut next);
        }
        cur = next;
    }
    if !cur.iter().all(|v| v.is_finite()) {
        return Err(NnError::NonFinite("network output"));
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub n_actions: usize,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Entropy of each head.
    pub entropy: Vec<f64>,
}

impl PolicyOutput {
    pub fn from_logits(logits: Vec<f64>, n_actions: usize) -> Self {
        let mut log_probs = vec![0.0; logits.len()];
        log_softmax_groups(&logits, n_actions, &mut log_probs);
        let mut probs = vec![0.0; logits.len()];
        for (pg, xg) in probs.chunks_exact_mut(n_actions).zip(logits.chunks_exact(n_actions)) {
            let max = xg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (p, v) in pg.iter_mut().zip(xg) {
                *p = (v - max).exp();
                sum += *p;
            }
            for p in pg.iter_mut() {
                *p /= sum;
            }
        }
        let entropy = probs
            .chunks_exact(n_actions)
            .zip(log_probs.chunks_exact(n_actions))
            .map(|(p, lp)| -p.iter().zip(lp).map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 }).sum::<f64>())
            .collect();
        Self { n_actions, logits, probs, log_probs, entropy }
    }

    pub fn n_heads(&self) -> usize {
        self.entropy.len()
    }

    pub fn probs(&self, head: usize) -> &[f64] {
        &self.probs[head * self.n_actions..(head + 1) * self.n_actions]
    }

    pub fn log_probs(&self, head: usize) -> &[f64] {
        &self.log_probs[head * self.n_actions..(head + 1) * self.n_actions]
    }

    pub fn total_entropy(&self) -> f64 {
        self.entropy.iter().sum()
    }

    pub fn greedy(&self, head: usize) -> usize {
        argmax(self.probs(head))
    }
}

pub fn policy_forward(params: &ParamVector, obs: &[f64]) -> Result<PolicyOutput, NnError> {
    let Head::Categorical { n_actions, .. } = params.spec.head else {
        return Err(NnError::Contract("policy_forward on a scalar head".into()));
    };
    let logits = forward_batch(params, obs, 1)?;
    Ok(PolicyOutput::from_logits(logits, n_actions))
}

pub fn value_forward(params: &ParamVector, obs: &[f64]) -> Result<f64, NnError> {
    if params.spec.head != Head::Scalar {
        return Err(NnError::Contract("value_forward on a categorical head".into()));
    }
    Ok(forward_batch(params, obs, 1)?[0])
}

/// First index of the largest entry.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw given `u` in `[0, 1)`.
pub fn sample_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}
