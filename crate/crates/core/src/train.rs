//! Training an encoder and task heads on a fixed weighted task loss.

use serde::{Deserialize, Serialize};

use crate::encoder::{encode, EncoderConfig, EncoderState, Embeddings};
use crate::error::Result;
use crate::graph::Graph;
use crate::numeric::RngStream;
use crate::tasks::{combined_loss, CombinedOutput, TaskHeads, TaskSet, TaskWeights};

const ENCODER_STREAM: u64 = 0;
const HEAD_STREAM: u64 = 1;
const STEP_STREAM: u64 = 2;

/// Seed of child stream `index` of stream `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    RngStream::new(seed).fork(stream).fork(index).seed()
}

/// Randomness used by the task losses at training step `step`.
pub fn step_rng(seed: u64, step: u64) -> RngStream {
    RngStream::new(seed).fork(STEP_STREAM).fork(step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            encoder: EncoderConfig::default(),
        }
    }
}

/// Fresh encoder and heads. The same seed always yields the same
/// initialization, whatever the task weights.
pub fn init_models(graph: &Graph, tasks: &TaskSet, config: &EncoderConfig, seed: u64) -> Result<(EncoderState, TaskHeads)> {
    let root = RngStream::new(seed);
    let encoder = EncoderState::init(graph.feature_dim(), config, &mut root.fork(ENCODER_STREAM))?;
    let heads = TaskHeads::init(tasks, config.hidden, config.learning_rate, &mut root.fork(HEAD_STREAM));
    Ok((encoder, heads))
}

/// One Adam step on `ℒ = Σ λ_i ℓ_i` for the encoder and all heads.
///
/// Returns the loss evaluation at the pre-update parameters.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    graph: &Graph,
    tasks: &TaskSet,
    weights: &TaskWeights,
    encoder: &mut EncoderState,
    heads: &mut TaskHeads,
    rng: &RngStream,
    keep_task_outputs: bool,
) -> Result<(Embeddings, CombinedOutput)> {
    let emb = encode(graph, encoder)?;
    let out = combined_loss(tasks, weights, graph, encoder, &emb, heads, rng, keep_task_outputs)?;
    let grad = out.encoder_gradient(graph, encoder, &emb)?;
    encoder.adam_step(&grad)?;
    heads.adam_step(&out.grad_heads, &tasks.kinds())?;
    Ok((emb, out))
}

/// A trained encoder with its heads and final embeddings.
#[derive(Debug, Clone)]
pub struct Trained {
    pub encoder: EncoderState,
    pub heads: TaskHeads,
    pub embeddings: Embeddings,
    /// `ℒ` at the last step, before its update; NaN when no step ran.
    pub final_loss: f64,
}

/// Trains from scratch for `config.epochs` steps. A non-finite loss or
/// gradient aborts with a numeric error.
pub fn train(graph: &Graph, tasks: &TaskSet, weights: &TaskWeights, config: &TrainConfig, seed: u64) -> Result<Trained> {
    let (mut encoder, mut heads) = init_models(graph, tasks, &config.encoder, seed)?;
    let mut final_loss = f64::NAN;
    for epoch in 0..config.epochs {
        let (_, out) = train_step(graph, tasks, weights, &mut encoder, &mut heads, &step_rng(seed, epoch as u64), false)?;
        final_loss = out.loss;
    }
    let embeddings = encode(graph, &encoder)?;
    Ok(Trained {
        encoder,
        heads,
        embeddings,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sbm_generate, SbmSpec};
    use crate::tasks::{TaskKind, TaskSettings};

    fn small() -> (Graph, TaskSet) {
        let g = sbm_generate(
            &SbmSpec {
                block_sizes: vec![15, 15],
                p_in: 0.3,
                p_out: 0.05,
                feature_noise: 0.3,
                noise_dims: 0,
            },
            3,
        )
        .unwrap();
        let settings = TaskSettings {
            clu_parts: 4,
            par_clusters: 4,
            pairsim_pairs: 60,
            pairdis_pairs: 60,
            dgi_samples: 20,
            ..TaskSettings::default()
        };
        let tasks = TaskSet::prepare(&g, &TaskKind::ALL, &settings, 1).unwrap();
        (g, tasks)
    }

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            encoder: EncoderConfig {
                hidden: 8,
                learning_rate: 0.01,
                ..EncoderConfig::default()
            },
        }
    }

    #[test]
    fn zero_weights_leave_the_encoder_untouched() {
        let (g, tasks) = small();
        let w = TaskWeights::uniform(5, 0.0).unwrap();
        let trained = train(&g, &tasks, &w, &config(5), 7).unwrap();
        let (init, _) = init_models(&g, &tasks, &config(5).encoder, 7).unwrap();
        assert_eq!(trained.encoder.weight, init.weight);
        assert_eq!(trained.encoder.prelu_slope, init.prelu_slope);
        assert_eq!(trained.final_loss, 0.0);
    }

    #[test]
    fn training_reduces_the_loss() {
        let (g, tasks) = small();
        let w = TaskWeights::uniform(5, 1.0).unwrap();
        let first = train(&g, &tasks, &w, &config(1), 2).unwrap().final_loss;
        let later = train(&g, &tasks, &w, &config(60), 2).unwrap().final_loss;
        assert!(later < first, "{later} >= {first}");
    }

    #[test]
    fn training_is_deterministic() {
        let (g, tasks) = small();
        let w = TaskWeights::new(vec![0.2, 0.9, 0.4, 0.0, 1.0]).unwrap();
        let a = train(&g, &tasks, &w, &config(10), 4).unwrap();
        let b = train(&g, &tasks, &w, &config(10), 4).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    }

    #[test]
    fn derived_seeds_differ_by_stream_and_index() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(5, 2, 3), derive_seed(5, 2, 3));
    }
}
