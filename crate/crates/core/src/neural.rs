//! Small fully connected network (tanh hidden layers, linear output) with
//! hand-written backpropagation and Adam.

use std::path::Path;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters are stored flat; layer `l` holds a row-major `out × in` weight
/// block followed by `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    #[serde(skip)]
    version: u64,
}

/// Activations of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    version: u64,
    /// `acts[0]` is the input, `acts[L]` the output.
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)], version: 0 })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch { expected: net.params.len(), got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Zeroes the output layer so the initial output is exactly zero.
    pub fn zero_output_layer(&mut self) {
        let n = self.sizes.len();
        let last = self.sizes[n - 2] * self.sizes[n - 1] + self.sizes[n - 1];
        let total = self.params.len();
        self.params_mut()[total - last..].iter_mut().for_each(|p| *p = 0.0);
    }

    fn layer_pass(&self, input: &[f64], out: &mut Vec<f64>, off: usize, n_in: usize, n_out: usize, hidden: bool) {
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        out.clear();
        for (row, bias) in w.chunks_exact(n_in).zip(b) {
            let z = row.iter().zip(input).fold(*bias, |acc, (wi, xi)| acc + wi * xi);
            out.push(if hidden { z.tanh() } else { z });
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: input.len() });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(input)?;
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut out = Vec::with_capacity(n_out);
            self.layer_pass(&acts[l], &mut out, off, n_in, n_out, l + 1 < layers);
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        let output = acts[layers].clone();
        Ok((output, ForwardCache { version: self.version, acts }))
    }

    /// Forward pass without keeping activations.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let layers = self.sizes.len() - 1;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            self.layer_pass(&cur, &mut next, off, n_in, n_out, l + 1 < layers);
            std::mem::swap(&mut cur, &mut next);
            off += n_in * n_out + n_out;
        }
        Ok(cur)
    }

    /// Adds the gradient of `output · grad_output` with respect to the
    /// parameters into `grads` and returns the gradient with respect to the
    /// input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if cache.version != self.version {
            return Err(Error::StaleCache { cache: cache.version, net: self.version });
        }
        if grad_output.len() != self.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: grad_output.len() });
        }
        if grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch { expected: self.params.len(), got: grads.len() });
        }
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = grad_output.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let h = &cache.acts[l];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(h) {
                    *g += d * x;
                }
            }
            let w = &self.params[off..off + n_in * n_out];
            let mut back = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                for (b, wi) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *b += d * wi;
                }
            }
            if l > 0 {
                for (b, hi) in back.iter_mut().zip(h) {
                    *b *= 1.0 - hi * hi;
                }
            }
            delta = back;
        }
        Ok(delta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0, lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn for_net(net: &Mlp, lr: f64) -> Self {
        Self::new(net.n_params(), lr)
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::ShapeMismatch { expected: params.len(), got: grads.len() });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch { expected: params.len(), got: state.m.len() });
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

pub fn adam_step(net: &mut Mlp, grads: &[f64], state: &mut AdamState) -> Result<()> {
    adam_update(net.params_mut(), grads, state)
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    version: u32,
    kind: String,
    payload: T,
}

/// Writes `value` as a versioned JSON checkpoint.
pub fn save_checkpoint<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let env = Envelope { version: CHECKPOINT_VERSION, kind: kind.to_string(), payload: value };
    let text = serde_json::to_string(&env).map_err(|e| Error::parse(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(env.version));
    }
    if env.kind != kind {
        return Err(Error::parse(path, format!("expected a {kind} checkpoint, found {}", env.kind)));
    }
    Ok(env.payload)
}
