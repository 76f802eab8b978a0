//! One-layer graph-convolution encoder `Z = PReLU(Ã X W)` and its gradients.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::{AdamState, DenseMatrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub prelu_init: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: 512,
            learning_rate: 0.001,
            prelu_init: 0.25,
        }
    }
}

/// Encoder parameters θ together with their optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    pub weight: DenseMatrix,
    pub prelu_slope: Vec<f64>,
    adam_weight: AdamState,
    adam_slope: AdamState,
}

/// Encoder output plus the cached pre-activation needed for backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub values: DenseMatrix,
    preactivation: DenseMatrix,
}

impl Embeddings {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn preactivation(&self) -> &DenseMatrix {
        &self.preactivation
    }
}

/// Gradient with respect to the encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrad {
    pub weight: DenseMatrix,
    pub prelu_slope: Vec<f64>,
}

impl EncoderGrad {
    pub fn zeros_like(state: &EncoderState) -> Self {
        Self {
            weight: DenseMatrix::zeros(state.weight.rows(), state.weight.cols()),
            prelu_slope: vec![0.0; state.prelu_slope.len()],
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &EncoderGrad) {
        self.weight
            .axpy(alpha, &other.weight)
            .expect("gradients of the same encoder share a shape");
        for (a, b) in self.prelu_slope.iter_mut().zip(&other.prelu_slope) {
            *a += alpha * b;
        }
    }

    /// Inner product over all parameter blocks.
    pub fn dot(&self, other: &EncoderGrad) -> f64 {
        crate::numeric::dot(self.weight.as_slice(), other.weight.as_slice())
            + crate::numeric::dot(&self.prelu_slope, &other.prelu_slope)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.weight.as_slice().to_vec();
        v.extend_from_slice(&self.prelu_slope);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.prelu_slope.iter().all(|v| v.is_finite())
    }
}

impl EncoderState {
    /// Glorot-uniform weights and constant PReLU slopes.
    pub fn init(input_dim: usize, config: &EncoderConfig, rng: &mut RngStream) -> Result<Self> {
        if config.hidden == 0 || input_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        let limit = (6.0 / (input_dim + config.hidden) as f64).sqrt();
        let data = (0..input_dim * config.hidden)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        let weight = DenseMatrix::from_vec(input_dim, config.hidden, data)?;
        Ok(Self::from_parts(
            weight,
            vec![config.prelu_init; config.hidden],
            config.learning_rate,
        ))
    }

    pub fn from_parts(weight: DenseMatrix, prelu_slope: Vec<f64>, learning_rate: f64) -> Self {
        let adam_weight = AdamState::new(weight.as_slice().len(), learning_rate);
        let adam_slope = AdamState::new(prelu_slope.len(), learning_rate);
        Self {
            weight,
            prelu_slope,
            adam_weight,
            adam_slope,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn hidden(&self) -> usize {
        self.weight.cols()
    }

    pub fn step_count(&self) -> u64 {
        self.adam_weight.step_count()
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam_weight.learning_rate = lr;
        self.adam_slope.learning_rate = lr;
    }

    /// One Adam update with the given gradient.
    pub fn adam_step(&mut self, grad: &EncoderGrad) -> Result<()> {
        self.adam_weight
            .step(self.weight.as_mut_slice(), grad.weight.as_slice(), "encoder.weight")?;
        self.adam_slope
            .step(&mut self.prelu_slope, &grad.prelu_slope, "encoder.prelu_slope")
    }

    /// Plain gradient step `θ ← θ - lr * grad`.
    pub fn sgd_step(&mut self, lr: f64, grad: &EncoderGrad) {
        self.weight
            .axpy(-lr, &grad.weight)
            .expect("gradient matches encoder shape");
        for (p, g) in self.prelu_slope.iter_mut().zip(&grad.prelu_slope) {
            *p -= lr * g;
        }
    }

    /// Binary checkpoint: magic, `input_dim`, `hidden`, `step_count` as
    /// little-endian u64, then weight (row-major) and slopes as little-endian
    /// f64.
    pub fn write_checkpoint(&self, mut out: impl Write) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        for v in [self.input_dim() as u64, self.hidden() as u64, self.step_count()] {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in self.weight.as_slice().iter().chain(&self.prelu_slope) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Restores parameters and step count; optimizer moments restart at
    /// zero.
    pub fn read_checkpoint(mut input: impl Read, learning_rate: f64) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Config("not an encoder checkpoint".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |input: &mut dyn Read| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let input_dim = next_u64(&mut input)? as usize;
        let hidden = next_u64(&mut input)? as usize;
        let steps = next_u64(&mut input)?;
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = [0u8; 8];
            (0..count)
                .map(|_| {
                    input.read_exact(&mut buf)?;
                    Ok(f64::from_le_bytes(buf))
                })
                .collect()
        };
        let weight = DenseMatrix::from_vec(input_dim, hidden, read_f64s(input_dim * hidden)?)?;
        let slope = read_f64s(hidden)?;
        let mut state = Self::from_parts(weight, slope, learning_rate);
        state.adam_weight.set_step_count(steps);
        state.adam_slope.set_step_count(steps);
        Ok(state)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"ASSLENC1";

/// `Z = PReLU(Ã X W)` on the graph's own features.
pub fn encode(graph: &Graph, state: &EncoderState) -> Result<Embeddings> {
    encode_propagated(graph.propagated_features(), state)
}

/// Encoder applied to already propagated rows `Ã X` (any subset of rows).
pub fn encode_propagated(propagated: &DenseMatrix, state: &EncoderState) -> Result<Embeddings> {
    if propagated.cols() != state.input_dim() {
        return Err(Error::Shape(format!(
            "features have width {}, encoder expects {}",
            propagated.cols(),
            state.input_dim()
        )));
    }
    let preactivation = propagated.matmul(&state.weight)?;
    let mut values = preactivation.clone();
    let h = state.hidden();
    for (k, v) in values.as_mut_slice().iter_mut().enumerate() {
        if *v < 0.0 {
            *v *= state.prelu_slope[k % h];
        }
    }
    Ok(Embeddings {
        values,
        preactivation,
    })
}

/// Reverse-mode gradient of the encoder contracted with `grad_embeddings`.
pub fn encode_backward(
    graph: &Graph,
    state: &EncoderState,
    embeddings: &Embeddings,
    grad_embeddings: &DenseMatrix,
) -> Result<EncoderGrad> {
    backward_propagated(graph.propagated_features(), state, embeddings, grad_embeddings)
}

/// Backward pass matching [`encode_propagated`].
pub fn backward_propagated(
    propagated: &DenseMatrix,
    state: &EncoderState,
    embeddings: &Embeddings,
    grad_embeddings: &DenseMatrix,
) -> Result<EncoderGrad> {
    let pre = &embeddings.preactivation;
    if grad_embeddings.shape() != pre.shape() || propagated.rows() != pre.rows() {
        return Err(Error::Shape(format!(
            "upstream gradient {:?} for embeddings {:?}",
            grad_embeddings.shape(),
            pre.shape()
        )));
    }
    let h = state.hidden();
    let mut grad_pre = grad_embeddings.clone();
    let mut grad_slope = vec![0.0; h];
    for (k, (g, &p)) in grad_pre
        .as_mut_slice()
        .iter_mut()
        .zip(pre.as_slice())
        .enumerate()
    {
        if p < 0.0 {
            let c = k % h;
            grad_slope[c] += *g * p;
            *g *= state.prelu_slope[c];
        }
    }
    // ∂(ÃXW)/∂W contracted with the upstream gradient is (ÃX)ᵀ G
    let grad_weight = propagated.t_matmul(&grad_pre)?;
    Ok(EncoderGrad {
        weight: grad_weight,
        prelu_slope: grad_slope,
    })
}
