//! Differentiable search over task weights with one-step meta-gradients.
//!
//! Each iteration takes one inner step on the encoder, then moves the task
//! weights against the gradient of the homophily loss through that step.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cluster::{homophily_loss_grad_embeddings, kmeans, pseudo_homophily, KMeansConfig, DEFAULT_TWO_SIGMA_SQ};
use crate::encoder::{encode, encode_backward, EncoderState, Embeddings};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::{dot, AdamState, DenseMatrix};
use crate::tasks::{TaskHeads, TaskSet, TaskWeights};
use crate::train::{derive_seed, init_models, step_rng, train_step, TrainConfig};

const KMEANS_STREAM: u64 = 10;
const EVAL_STREAM: u64 = 11;

/// `g_i = -ε ⟨∇θ H(θ_{t+1}), ∇θ ℓ_i(θ_t)⟩` for every task.
pub fn meta_gradient(per_task_grads: &[Vec<f64>], homophily_grad: &[f64], inner_lr: f64) -> Result<Vec<f64>> {
    per_task_grads
        .iter()
        .enumerate()
        .map(|(i, g)| {
            if g.len() != homophily_grad.len() {
                return Err(Error::Shape(format!(
                    "task {i} gradient has {} entries, homophily gradient {}",
                    g.len(),
                    homophily_grad.len()
                )));
            }
            Ok(-inner_lr * dot(homophily_grad, g))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsConfig {
    /// Number of iterations and the encoder (inner Adam rate ε included).
    pub train: TrainConfig,
    /// Outer Adam learning rate η.
    pub outer_lr: f64,
    pub initial_weight: f64,
    pub clusters: usize,
    pub two_sigma_sq: f64,
    /// Pseudo-homophily is measured at the first iteration, every
    /// `eval_interval` iterations and at the last one.
    pub eval_interval: usize,
    /// Iterations between centroid recomputations.
    pub centroid_refresh: usize,
    pub kmeans: KMeansConfig,
}

impl Default for DsConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            outer_lr: 0.05,
            initial_weight: 0.5,
            clusters: 5,
            two_sigma_sq: DEFAULT_TWO_SIGMA_SQ,
            eval_interval: 20,
            centroid_refresh: 1,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl DsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train.encoder.learning_rate > 0.0 && self.outer_lr > 0.0) {
            return Err(Error::Config("inner and outer learning rates must be positive".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if self.eval_interval == 0 || self.centroid_refresh == 0 {
            return Err(Error::Config("evaluation and centroid intervals must be positive".into()));
        }
        if self.clusters < 2 {
            return Err(Error::Config("the homophily loss needs at least two clusters".into()));
        }
        if !(self.two_sigma_sq > 0.0) {
            return Err(Error::Config("2σ² must be positive".into()));
        }
        Ok(())
    }
}

/// Mutable search state between iterations.
#[derive(Debug, Clone)]
pub struct DsState {
    pub encoder: EncoderState,
    pub heads: TaskHeads,
    pub weights: TaskWeights,
    outer: AdamState,
    inner_lr: f64,
    centroids: Option<DenseMatrix>,
    iteration: usize,
}

impl DsState {
    pub fn new(graph: &Graph, tasks: &TaskSet, config: &DsConfig, seed: u64) -> Result<Self> {
        let (encoder, heads) = init_models(graph, tasks, &config.train.encoder, seed)?;
        Ok(Self {
            encoder,
            heads,
            weights: TaskWeights::uniform(tasks.len(), config.initial_weight)?,
            outer: AdamState::new(tasks.len(), config.outer_lr),
            inner_lr: config.train.encoder.learning_rate,
            centroids: None,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DsStepRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Weights after the update and clip.
    pub weights: Vec<f64>,
    pub loss: f64,
    pub task_losses: Vec<f64>,
    /// Homophily loss at the updated encoder.
    pub homophily_loss: f64,
    pub pseudo_homophily: Option<f64>,
    pub meta_gradient: Vec<f64>,
    pub step_ms: f64,
    pub eval_ms: f64,
}

/// One iteration: inner Adam step, centroids from the pre-step embeddings,
/// homophily loss at the post-step encoder, outer Adam step on the weights
/// and a clip into `[0, 1]`.
pub fn ds_step(graph: &Graph, tasks: &TaskSet, state: &mut DsState, config: &DsConfig, seed: u64) -> Result<(DsStepRecord, Embeddings)> {
    let start = Instant::now();
    let t = state.iteration;
    let before = state.encoder.clone();
    let (emb_t, out) = train_step(
        graph,
        tasks,
        &state.weights,
        &mut state.encoder,
        &mut state.heads,
        &step_rng(seed, t as u64),
        true,
    )?;
    let per_task: Vec<Vec<f64>> = out
        .task_outputs
        .iter()
        .map(|o| o.encoder_gradient(graph, &before, &emb_t).map(|g| g.flatten()))
        .collect::<Result<_>>()?;

    if state.centroids.is_none() || t % config.centroid_refresh == 0 {
        let model = kmeans(&emb_t.values, config.clusters, derive_seed(seed, KMEANS_STREAM, t as u64), &config.kmeans)?;
        state.centroids = Some(model.centroids);
    }
    let centroids = state.centroids.as_ref().expect("set above");
    let emb_next = encode(graph, &state.encoder)?;
    let (h, grad_z) = homophily_loss_grad_embeddings(graph, &emb_next.values, centroids, config.two_sigma_sq)?;
    if !h.is_finite() {
        return Err(Error::NonFinite(format!("homophily loss is {h} at iteration {}", t + 1)));
    }
    let h_grad = encode_backward(graph, &state.encoder, &emb_next, &grad_z)?.flatten();
    let meta = meta_gradient(&per_task, &h_grad, state.inner_lr)?;
    let mut lambda = state.weights.as_slice().to_vec();
    state.outer.step(&mut lambda, &meta, "task weights")?;
    state.weights = TaskWeights::new(lambda)?;
    state.iteration += 1;
    Ok((
        DsStepRecord {
            iteration: state.iteration,
            weights: state.weights.as_slice().to_vec(),
            loss: out.loss,
            task_losses: out.per_task_losses,
            homophily_loss: h,
            pseudo_homophily: None,
            meta_gradient: meta,
            step_ms: start.elapsed().as_secs_f64() * 1e3,
            eval_ms: 0.0,
        },
        emb_next,
    ))
}

/// State with the highest measured pseudo-homophily.
#[derive(Debug, Clone)]
pub struct DsCheckpoint {
    pub iteration: usize,
    pub pseudo_homophily: f64,
    pub encoder: EncoderState,
    pub weights: TaskWeights,
    pub embeddings: Embeddings,
}

#[derive(Debug, Clone)]
pub struct DsResult {
    pub records: Vec<DsStepRecord>,
    pub checkpoint: DsCheckpoint,
    pub final_weights: TaskWeights,
}

/// Runs `config.train.epochs` iterations. `observe` sees every record, and
/// the embeddings whenever pseudo-homophily was measured.
pub fn run_ds<F>(graph: &Graph, tasks: &TaskSet, config: &DsConfig, seed: u64, mut observe: F) -> Result<DsResult>
where
    F: FnMut(&DsStepRecord, Option<&Embeddings>) -> Result<()>,
{
    config.validate()?;
    let mut state = DsState::new(graph, tasks, config, seed)?;
    let total = config.train.epochs;
    let mut records = Vec::with_capacity(total);
    let mut checkpoint: Option<DsCheckpoint> = None;
    for _ in 0..total {
        let (mut record, emb) = ds_step(graph, tasks, &mut state, config, seed)?;
        let it = record.iteration;
        let measured = it == 1 || it % config.eval_interval == 0 || it == total;
        if measured {
            let start = Instant::now();
            let ph = pseudo_homophily(
                graph,
                &emb.values,
                config.clusters,
                derive_seed(seed, EVAL_STREAM, it as u64),
                &config.kmeans,
            )?;
            record.eval_ms = start.elapsed().as_secs_f64() * 1e3;
            record.pseudo_homophily = Some(ph);
            if checkpoint.as_ref().is_none_or(|c| ph > c.pseudo_homophily) {
                checkpoint = Some(DsCheckpoint {
                    iteration: it,
                    pseudo_homophily: ph,
                    encoder: state.encoder.clone(),
                    weights: state.weights.clone(),
                    embeddings: emb.clone(),
                });
            }
            log::info!("iteration {it}: H {:.5}, pseudo-homophily {ph:.4}, weights {:?}", record.homophily_loss, record.weights);
        }
        observe(&record, measured.then_some(&emb))?;
        records.push(record);
    }
    Ok(DsResult {
        records,
        checkpoint: checkpoint.expect("the first iteration is always measured"),
        final_weights: state.weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sbm_generate, SbmSpec};
    use crate::numeric::{max_relative_error, RngStream};
    use crate::tasks::{TaskKind, TaskSettings};

    #[test]
    fn meta_gradient_examples() {
        let g = vec![vec![1.0, 2.0], vec![3.0, -1.0]];
        assert_eq!(meta_gradient(&g, &[0.0, 0.0], 0.1).unwrap(), vec![0.0, 0.0]);
        // second task gradient is orthogonal to (1, 3)
        let m = meta_gradient(&g, &[1.0, 3.0], 0.1).unwrap();
        assert!((m[0] + 0.7).abs() < 1e-15);
        assert_eq!(m[1], 0.0);
        assert!(meta_gradient(&g, &[1.0], 0.1).is_err());
    }

    #[test]
    fn meta_gradient_is_bilinear() {
        let mut rng = RngStream::new(3);
        let tasks: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.normal()).collect()).collect();
        let h: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let base = meta_gradient(&tasks, &h, 0.01).unwrap();
        let alpha = 2.5;
        let scaled_h: Vec<f64> = h.iter().map(|v| v * alpha).collect();
        let by_h = meta_gradient(&tasks, &scaled_h, 0.01).unwrap();
        let by_eps = meta_gradient(&tasks, &h, 0.01 * alpha).unwrap();
        for ((b, x), y) in base.iter().zip(&by_h).zip(&by_eps) {
            assert!((x - alpha * b).abs() < 1e-14);
            assert!((y - alpha * b).abs() < 1e-14);
        }
    }

    /// Two quadratic task losses `½‖A_i θ - b_i‖²` and a non-quadratic
    /// outer objective; the meta-gradient must match central differences of
    /// `H(θ - ε Σ λ_i ∇ℓ_i(θ))` in λ.
    #[test]
    fn meta_gradient_matches_one_step_finite_differences() {
        let mut rng = RngStream::new(21);
        let dim = 4;
        let mats: Vec<DenseMatrix> = (0..2)
            .map(|_| DenseMatrix::from_vec(dim, dim, (0..dim * dim).map(|_| rng.normal()).collect()).unwrap())
            .collect();
        let rhs: Vec<Vec<f64>> = (0..2).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
        let theta: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let target: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let eps = 0.05;
        let task_grad = |i: usize, th: &[f64]| -> Vec<f64> {
            let a = &mats[i];
            let resid: Vec<f64> = (0..dim).map(|r| dot(a.row(r), th) - rhs[i][r]).collect();
            (0..dim).map(|c| (0..dim).map(|r| a[(r, c)] * resid[r]).sum()).collect()
        };
        // H(θ) = Σ log(1 + (θ_j - t_j)²)
        let outer = |th: &[f64]| -> f64 { th.iter().zip(&target).map(|(a, b)| (1.0 + (a - b).powi(2)).ln()).sum() };
        let outer_grad = |th: &[f64]| -> Vec<f64> {
            th.iter().zip(&target).map(|(a, b)| 2.0 * (a - b) / (1.0 + (a - b).powi(2))).collect()
        };
        let grads: Vec<Vec<f64>> = (0..2).map(|i| task_grad(i, &theta)).collect();
        let step = |lambda: &[f64]| -> Vec<f64> {
            (0..dim)
                .map(|j| theta[j] - eps * (lambda[0] * grads[0][j] + lambda[1] * grads[1][j]))
                .collect()
        };
        let lambda = [0.3, 0.7];
        let next = step(&lambda);
        let analytic = meta_gradient(&grads, &outer_grad(&next), eps).unwrap();
        let numeric: Vec<f64> = (0..2)
            .map(|i| {
                let d = 1e-6;
                let mut plus = lambda;
                let mut minus = lambda;
                plus[i] += d;
                minus[i] -= d;
                (outer(&step(&plus)) - outer(&step(&minus))) / (2.0 * d)
            })
            .collect();
        assert!(max_relative_error(&analytic, &numeric) < 1e-3);
    }

    fn tiny() -> (Graph, TaskSet, DsConfig) {
        let g = sbm_generate(
            &SbmSpec {
                block_sizes: vec![15, 15],
                p_in: 0.3,
                p_out: 0.03,
                feature_noise: 0.4,
                noise_dims: 0,
            },
            2,
        )
        .unwrap();
        let settings = TaskSettings {
            clu_parts: 4,
            par_clusters: 4,
            pairsim_pairs: 60,
            pairdis_pairs: 60,
            dgi_samples: 30,
            ..TaskSettings::default()
        };
        let tasks = TaskSet::prepare(&g, &TaskKind::ALL, &settings, 0).unwrap();
        let mut cfg = DsConfig {
            clusters: 2,
            eval_interval: 5,
            two_sigma_sq: 0.5,
            ..DsConfig::default()
        };
        cfg.train.epochs = 12;
        cfg.train.encoder.hidden = 8;
        cfg.train.encoder.learning_rate = 0.01;
        (g, tasks, cfg)
    }

    #[test]
    fn corrupted_weights_are_clipped() {
        let (g, tasks, cfg) = tiny();
        let mut state = DsState::new(&g, &tasks, &cfg, 1).unwrap();
        state.weights = TaskWeights::unclipped(vec![1.2, 0.5, 0.5, 0.5, -0.3]);
        let (rec, _) = ds_step(&g, &tasks, &mut state, &cfg, 1).unwrap();
        assert_eq!(rec.weights[0], 1.0);
        assert_eq!(rec.weights[4], 0.0);
        assert!(rec.weights.iter().all(|w| (0.0..=1.0).contains(w)));
    }

    #[test]
    fn zero_weights_can_still_move() {
        let (g, tasks, cfg) = tiny();
        let mut state = DsState::new(&g, &tasks, &cfg, 4).unwrap();
        state.weights = TaskWeights::uniform(5, 0.0).unwrap();
        let before = state.encoder.clone();
        let (rec, _) = ds_step(&g, &tasks, &mut state, &cfg, 4).unwrap();
        assert_eq!(state.encoder.weight, before.weight);
        assert_eq!(rec.loss, 0.0);
        // a positive meta-gradient pushes a zero weight below 0 and the clip
        // returns it; a negative one lets it grow
        for (w, g) in rec.weights.iter().zip(&rec.meta_gradient) {
            if *g < 0.0 {
                assert!(*w > 0.0);
            } else {
                assert_eq!(*w, 0.0);
            }
        }
        assert!(rec.meta_gradient.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn runs_are_deterministic_and_bounded() {
        let (g, tasks, cfg) = tiny();
        let run = || run_ds(&g, &tasks, &cfg, 9, |_, _| Ok(())).unwrap();
        let a = run();
        let b = run();
        let strip = |r: &DsResult| -> Vec<DsStepRecord> {
            r.records
                .iter()
                .cloned()
                .map(|mut x| {
                    x.step_ms = 0.0;
                    x.eval_ms = 0.0;
                    x
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.records.len(), 12);
        for r in &a.records {
            assert!(r.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }
        let measured: Vec<usize> = a.records.iter().filter(|r| r.pseudo_homophily.is_some()).map(|r| r.iteration).collect();
        assert_eq!(measured, vec![1, 5, 10, 12]);
        let best = a.records.iter().filter_map(|r| r.pseudo_homophily).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.checkpoint.pseudo_homophily, best);
    }

    #[test]
    fn single_iteration_has_one_checkpoint() {
        let (g, tasks, mut cfg) = tiny();
        cfg.train.epochs = 1;
        let mut calls = 0;
        let r = run_ds(&g, &tasks, &cfg, 0, |_, emb| {
            calls += usize::from(emb.is_some());
            Ok(())
        })
        .unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(calls, 1);
        assert_eq!(r.checkpoint.iteration, 1);
    }

    /// Drives one weight with the outer optimizer for 100 steps whose
    /// task and homophily gradients have inner product of sign `sign`.
    fn drive_single_weight(sign: f64) -> Vec<f64> {
        let mut rng = RngStream::new(6);
        let mut outer = AdamState::new(1, 0.05);
        let mut weights = TaskWeights::uniform(1, 0.5).unwrap();
        let mut path = vec![0.5];
        for _ in 0..100 {
            let task: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
            let h: Vec<f64> = task.iter().map(|v| sign * v * rng.uniform_range(0.1, 2.0)).collect();
            let meta = meta_gradient(&[task], &h, 0.001).unwrap();
            let mut lambda = weights.as_slice().to_vec();
            outer.step(&mut lambda, &meta, "weights").unwrap();
            weights = TaskWeights::new(lambda).unwrap();
            path.push(weights.as_slice()[0]);
        }
        path
    }

    #[test]
    fn aligned_gradients_raise_a_single_weight() {
        // the inner step along -∇ℓ also lowers H, so more weight helps
        let path = drive_single_weight(1.0);
        assert!(path.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*path.last().unwrap(), 1.0);
    }

    #[test]
    fn opposed_gradients_lower_a_single_weight() {
        let path = drive_single_weight(-1.0);
        assert!(path.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*path.last().unwrap(), 0.0);
    }

}
