//! Self-supervised pretext tasks sharing one encoder.
//!
//! Each task turns the graph into fixed pseudo-targets once, then maps
//! embeddings to a scalar loss through its own small head.

mod dgi;
mod pairs;
mod partition;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig};
use crate::encoder::{EncoderGrad, EncoderState, Embeddings};
use crate::error::{Error, Result};
use crate::graph::{Graph, LabelVector};
use crate::numeric::{AdamState, DenseMatrix, RngStream};

pub use pairs::{cosine_similarity, distance_pairs, similarity_pairs};
pub use partition::balanced_partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    /// Classify nodes into balanced topology partitions.
    Clu,
    /// Classify nodes into k-means clusters of their raw features.
    Par,
    /// Regress the feature cosine similarity of node pairs.
    PairSim,
    /// Classify the hop distance of node pairs.
    PairDis,
    /// Contrast node embeddings against a graph summary.
    Dgi,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Clu,
        TaskKind::Par,
        TaskKind::PairSim,
        TaskKind::PairDis,
        TaskKind::Dgi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Clu => "Clu",
            TaskKind::Par => "Par",
            TaskKind::PairSim => "PairSim",
            TaskKind::PairDis => "PairDis",
            TaskKind::Dgi => "Dgi",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown task '{s}' (expected Clu, Par, PairSim, PairDis or Dgi)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskSettings {
    pub clu_parts: usize,
    pub par_clusters: usize,
    pub pairsim_pairs: usize,
    pub pairdis_pairs: usize,
    pub pairdis_cap: usize,
    pub dgi_samples: usize,
}

impl Default for TaskSettings {
    fn default() -> Self {
        Self {
            clu_parts: 10,
            par_clusters: 10,
            pairsim_pairs: 4000,
            pairdis_pairs: 4000,
            pairdis_cap: 4,
            dgi_samples: 2000,
        }
    }
}

/// Supervision computed once per graph.
#[derive(Debug, Clone, PartialEq)]
pub enum PseudoTargets {
    Clu { labels: LabelVector, classes: usize },
    Par { labels: LabelVector, classes: usize },
    PairSim { pairs: Vec<(usize, usize)>, targets: Vec<f64> },
    PairDis { pairs: Vec<(usize, usize)>, labels: Vec<usize>, classes: usize },
    /// Positive and negative rows are redrawn every step.
    Dgi { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub kind: TaskKind,
    pub targets: PseudoTargets,
}

/// Topology partition ids for `Clu`.
pub fn prepare_clu(graph: &Graph, num_parts: usize, seed: u64) -> Result<LabelVector> {
    balanced_partition(graph, num_parts, seed)
}

/// k-means cluster ids of the raw features for `Par`.
pub fn prepare_par(graph: &Graph, num_clusters: usize, seed: u64) -> Result<LabelVector> {
    let model = kmeans(graph.features(), num_clusters, seed, &KMeansConfig::default())?;
    let mut used = vec![false; num_clusters];
    for &l in &model.labels {
        used[l] = true;
    }
    let populated = used.iter().filter(|&&u| u).count();
    if populated < num_clusters {
        log::warn!("feature clustering populated only {populated} of {num_clusters} clusters");
    }
    Ok(model.labels)
}

/// The ordered task list `ℓ_1 … ℓ_n` with prepared targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSet {
    tasks: Vec<Task>,
}

impl TaskSet {
    /// Prepares targets for `kinds` in the given order. Each task draws from
    /// its own seed stream, so selecting a subset does not change the
    /// targets of the remaining tasks.
    pub fn prepare(graph: &Graph, kinds: &[TaskKind], settings: &TaskSettings, seed: u64) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::Config("at least one task is required".into()));
        }
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].contains(k) {
                return Err(Error::Config(format!("task {k} listed twice")));
            }
        }
        let root = RngStream::new(seed);
        let mut tasks = Vec::with_capacity(kinds.len());
        for &kind in kinds {
            let s = root.fork(kind.index()).next_u64();
            let targets = match kind {
                TaskKind::Clu => {
                    let parts = settings.clu_parts.min(graph.num_nodes());
                    PseudoTargets::Clu {
                        labels: prepare_clu(graph, parts, s)?,
                        classes: parts,
                    }
                }
                TaskKind::Par => {
                    let k = settings.par_clusters.min(graph.num_nodes());
                    PseudoTargets::Par {
                        labels: prepare_par(graph, k, s)?,
                        classes: k,
                    }
                }
                TaskKind::PairSim => {
                    let (pairs, targets) = similarity_pairs(graph, settings.pairsim_pairs, s)?;
                    PseudoTargets::PairSim { pairs, targets }
                }
                TaskKind::PairDis => {
                    let (pairs, labels) = distance_pairs(graph, settings.pairdis_pairs, settings.pairdis_cap, s)?;
                    PseudoTargets::PairDis {
                        pairs,
                        labels,
                        classes: settings.pairdis_cap,
                    }
                }
                TaskKind::Dgi => {
                    if settings.dgi_samples == 0 {
                        return Err(Error::Config("contrastive task needs a positive sample count".into()));
                    }
                    PseudoTargets::Dgi {
                        samples: settings.dgi_samples,
                    }
                }
            };
            tasks.push(Task { kind, targets });
        }
        Ok(Self { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn kinds(&self) -> Vec<TaskKind> {
        self.tasks.iter().map(|t| t.kind).collect()
    }
}

/// Task weights λ, kept inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskWeights(Vec<f64>);

impl TaskWeights {
    /// Clips every entry into `[0, 1]`; NaN is rejected.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite("task weights contain NaN".into()));
        }
        let mut w = Self(values);
        w.clip();
        Ok(w)
    }

    /// Bypasses the clip; only for exercising code that must restore it.
    #[cfg(test)]
    pub(crate) fn unclipped(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Replaces the values, clipping into `[0, 1]`.
    pub fn set(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.0.len() {
            return Err(Error::Shape(format!("{} weights for {} tasks", values.len(), self.0.len())));
        }
        *self = Self::new(values.to_vec())?;
        Ok(())
    }

    fn clip(&mut self) {
        for v in &mut self.0 {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Affine head `x W + b` owned by one task.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Head {
    pub fn zeros(inputs: usize, outputs: usize, biases: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(inputs, outputs),
            bias: vec![0.0; biases],
        }
    }

    fn glorot(inputs: usize, outputs: usize, biases: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs).map(|_| rng.uniform_range(-limit, limit)).collect();
        Self {
            weight: DenseMatrix::from_vec(inputs, outputs, data).expect("sized above"),
            bias: vec![0.0; biases],
        }
    }

    fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }

    pub fn dot(&self, other: &Head) -> f64 {
        crate::numeric::dot(self.weight.as_slice(), other.weight.as_slice())
            + crate::numeric::dot(&self.bias, &other.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|v| v.is_finite())
    }

    fn add_scaled(&mut self, alpha: f64, other: &Head) {
        for (a, b) in self.weight.as_mut_slice().iter_mut().zip(other.weight.as_slice()) {
            *a += alpha * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += alpha * b;
        }
    }

    fn scale(&mut self, alpha: f64) {
        self.weight.scale(alpha);
        for b in &mut self.bias {
            *b *= alpha;
        }
    }
}

/// Gradient with respect to a [`Head`] has the same shape.
pub type HeadGrad = Head;

/// Heads for every task of a set, each with its own Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskHeads {
    pub heads: Vec<Head>,
    adam: Vec<AdamState>,
}

impl TaskHeads {
    pub fn init(tasks: &TaskSet, hidden: usize, learning_rate: f64, rng: &mut RngStream) -> Self {
        let heads: Vec<Head> = tasks
            .tasks()
            .iter()
            .map(|t| {
                let (inputs, outputs, biases) = head_shape(&t.targets, hidden);
                Head::glorot(inputs, outputs, biases, rng)
            })
            .collect();
        let adam = heads.iter().map(|h| AdamState::new(h.num_params(), learning_rate)).collect();
        Self { heads, adam }
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        for a in &mut self.adam {
            a.learning_rate = lr;
        }
    }

    pub fn adam_step(&mut self, grads: &[HeadGrad], kinds: &[TaskKind]) -> Result<()> {
        if grads.len() != self.heads.len() {
            return Err(Error::Shape(format!("{} head gradients for {} heads", grads.len(), self.heads.len())));
        }
        for (i, ((head, adam), grad)) in self.heads.iter_mut().zip(&mut self.adam).zip(grads).enumerate() {
            let mut params = flatten_head(head);
            let name = kinds.get(i).map_or("head", |k| k.name());
            adam.step(&mut params, &flatten_head(grad), name)?;
            unflatten_head(head, &params);
        }
        Ok(())
    }

    pub fn sgd_step(&mut self, lr: f64, grads: &[HeadGrad]) {
        for (head, grad) in self.heads.iter_mut().zip(grads) {
            head.add_scaled(-lr, grad);
        }
    }
}

fn flatten_head(h: &Head) -> Vec<f64> {
    let mut v = h.weight.as_slice().to_vec();
    v.extend_from_slice(&h.bias);
    v
}

fn unflatten_head(h: &mut Head, params: &[f64]) {
    let split = h.weight.as_slice().len();
    h.weight.as_mut_slice().copy_from_slice(&params[..split]);
    h.bias.copy_from_slice(&params[split..]);
}

/// Weight rows, weight columns and bias length of a task head.
fn head_shape(targets: &PseudoTargets, hidden: usize) -> (usize, usize, usize) {
    match targets {
        PseudoTargets::Clu { classes, .. } | PseudoTargets::Par { classes, .. } => (hidden, *classes, *classes),
        PseudoTargets::PairSim { .. } => (hidden, 1, 1),
        PseudoTargets::PairDis { classes, .. } => (2 * hidden, *classes, *classes),
        // bilinear form zᵀ W s with a scalar bias
        PseudoTargets::Dgi { .. } => (hidden, hidden, 1),
    }
}

/// Loss of one task with gradients for the embeddings and its head.
///
/// `encoder_grad` carries any gradient that reaches the encoder without
/// passing through the shared embeddings (the corrupted branch of `Dgi`).
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub loss: f64,
    pub grad_embeddings: DenseMatrix,
    pub grad_head: HeadGrad,
    pub encoder_grad: Option<EncoderGrad>,
}

impl TaskOutput {
    /// Full gradient of this task's loss with respect to the encoder.
    pub fn encoder_gradient(&self, graph: &Graph, state: &EncoderState, emb: &Embeddings) -> Result<EncoderGrad> {
        let mut g = crate::encoder::encode_backward(graph, state, emb, &self.grad_embeddings)?;
        if let Some(extra) = &self.encoder_grad {
            g.add_scaled(1.0, extra);
        }
        Ok(g)
    }
}

pub fn task_loss_and_grad(
    task: &Task,
    graph: &Graph,
    state: &EncoderState,
    emb: &Embeddings,
    head: &Head,
    rng: &mut RngStream,
) -> Result<TaskOutput> {
    let (inputs, outputs, biases) = head_shape(&task.targets, state.hidden());
    if head.weight.shape() != (inputs, outputs) || head.bias.len() != biases {
        return Err(Error::Shape(format!(
            "{} head is {:?}, expected ({inputs}, {outputs})",
            task.kind,
            head.weight.shape()
        )));
    }
    if emb.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!("{} embedding rows for {} nodes", emb.rows(), graph.num_nodes())));
    }
    let z = &emb.values;
    let out = match &task.targets {
        PseudoTargets::Clu { labels, .. } | PseudoTargets::Par { labels, .. } => node_classification(z, labels, head)?,
        PseudoTargets::PairSim { pairs, targets } => pair_regression(z, pairs, targets, head),
        PseudoTargets::PairDis { pairs, labels, .. } => pair_classification(z, pairs, labels, head),
        PseudoTargets::Dgi { samples } => dgi::contrastive_loss(graph, state, emb, head, *samples, rng)?,
    };
    if !out.loss.is_finite() {
        return Err(Error::NonFinite(format!("{} loss is {}", task.kind, out.loss)));
    }
    Ok(out)
}

/// In-place softmax; returns `ln Σ exp` of the original row.
fn softmax_row(row: &mut [f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for r in row.iter_mut() {
        *r = (*r - max).exp();
        total += *r;
    }
    for r in row.iter_mut() {
        *r /= total;
    }
    max + total.ln()
}

/// Mean softmax cross-entropy of `z W + b` against `labels`.
fn node_classification(z: &DenseMatrix, labels: &[usize], head: &Head) -> Result<TaskOutput> {
    let n = z.rows();
    let mut logits = z.matmul(&head.weight)?;
    let mut loss = 0.0;
    let inv = 1.0 / n as f64;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row_mut(i);
        for (r, b) in row.iter_mut().zip(&head.bias) {
            *r += b;
        }
        let target_logit = row[y];
        loss += softmax_row(row) - target_logit;
        // ∂/∂logits = softmax - onehot
        row[y] -= 1.0;
        for r in row.iter_mut() {
            *r *= inv;
        }
    }
    let grad_w = z.t_matmul(&logits)?;
    let grad_b = logits.column_means().into_iter().map(|m| m * n as f64).collect();
    let grad_z = logits.matmul_t(&head.weight)?;
    Ok(TaskOutput {
        loss: loss * inv,
        grad_embeddings: grad_z,
        grad_head: Head {
            weight: grad_w,
            bias: grad_b,
        },
        encoder_grad: None,
    })
}

/// Mean squared error of `|z_u - z_v| w + b` against the targets.
fn pair_regression(z: &DenseMatrix, pairs: &[(usize, usize)], targets: &[f64], head: &Head) -> TaskOutput {
    let h = z.cols();
    let w = head.weight.as_slice();
    let mut grad_z = DenseMatrix::zeros(z.rows(), h);
    let mut grad_w = vec![0.0; h];
    let mut grad_b = 0.0;
    let mut loss = 0.0;
    let inv = 1.0 / pairs.len() as f64;
    let mut diff = vec![0.0; h];
    for (&(u, v), &t) in pairs.iter().zip(targets) {
        for ((d, a), b) in diff.iter_mut().zip(z.row(u)).zip(z.row(v)) {
            *d = a - b;
        }
        let pred: f64 = diff.iter().zip(w).map(|(d, w)| d.abs() * w).sum::<f64>() + head.bias[0];
        let err = pred - t;
        loss += err * err;
        let g = 2.0 * err * inv;
        grad_b += g;
        for c in 0..h {
            grad_w[c] += g * diff[c].abs();
            let s = g * w[c] * sign(diff[c]);
            grad_z[(u, c)] += s;
            grad_z[(v, c)] -= s;
        }
    }
    TaskOutput {
        loss: loss * inv,
        grad_embeddings: grad_z,
        grad_head: Head {
            weight: DenseMatrix::from_vec(h, 1, grad_w).expect("sized above"),
            bias: vec![grad_b],
        },
        encoder_grad: None,
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean cross-entropy of `[z_u ‖ z_v] W + b` against distance buckets.
fn pair_classification(z: &DenseMatrix, pairs: &[(usize, usize)], labels: &[usize], head: &Head) -> TaskOutput {
    let h = z.cols();
    let classes = head.bias.len();
    let mut grad_z = DenseMatrix::zeros(z.rows(), h);
    let mut grad_w = DenseMatrix::zeros(2 * h, classes);
    let mut grad_b = vec![0.0; classes];
    let mut loss = 0.0;
    let inv = 1.0 / pairs.len() as f64;
    let mut logits = vec![0.0; classes];
    for (&(u, v), &y) in pairs.iter().zip(labels) {
        logits.copy_from_slice(&head.bias);
        for (half, node) in [u, v].into_iter().enumerate() {
            for (c, &x) in z.row(node).iter().enumerate() {
                let w = head.weight.row(half * h + c);
                for (l, wk) in logits.iter_mut().zip(w) {
                    *l += x * wk;
                }
            }
        }
        let target_logit = logits[y];
        loss += softmax_row(&mut logits) - target_logit;
        logits[y] -= 1.0;
        for l in logits.iter_mut() {
            *l *= inv;
        }
        for (b, l) in grad_b.iter_mut().zip(&logits) {
            *b += l;
        }
        for (half, node) in [u, v].into_iter().enumerate() {
            for c in 0..h {
                let x = z[(node, c)];
                let w = head.weight.row(half * h + c);
                grad_z[(node, c)] += crate::numeric::dot(w, &logits);
                for (gw, l) in grad_w.row_mut(half * h + c).iter_mut().zip(&logits) {
                    *gw += x * l;
                }
            }
        }
    }
    TaskOutput {
        loss: loss * inv,
        grad_embeddings: grad_z,
        grad_head: Head {
            weight: grad_w,
            bias: grad_b,
        },
        encoder_grad: None,
    }
}

/// `ℒ = Σ λ_i ℓ_i` with its gradients.
#[derive(Debug, Clone)]
pub struct CombinedOutput {
    pub loss: f64,
    pub per_task_losses: Vec<f64>,
    /// `Σ λ_i ∂ℓ_i/∂Z`.
    pub grad_embeddings: DenseMatrix,
    /// `λ_i ∂ℓ_i/∂head_i` for every task.
    pub grad_heads: Vec<HeadGrad>,
    /// `Σ λ_i` of the gradients that bypass the embeddings.
    pub encoder_extra: Option<EncoderGrad>,
    /// Unweighted per-task outputs, kept only when requested.
    pub task_outputs: Vec<TaskOutput>,
}

impl CombinedOutput {
    pub fn encoder_gradient(&self, graph: &Graph, state: &EncoderState, emb: &Embeddings) -> Result<EncoderGrad> {
        let mut g = crate::encoder::encode_backward(graph, state, emb, &self.grad_embeddings)?;
        if let Some(extra) = &self.encoder_extra {
            g.add_scaled(1.0, extra);
        }
        Ok(g)
    }
}

/// Every task is evaluated (even at λ_i = 0) with randomness from
/// `rng.fork(i)`, so the result is linear in λ for a fixed `rng`.
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    tasks: &TaskSet,
    weights: &TaskWeights,
    graph: &Graph,
    state: &EncoderState,
    emb: &Embeddings,
    heads: &TaskHeads,
    rng: &RngStream,
    keep_task_outputs: bool,
) -> Result<CombinedOutput> {
    if weights.len() != tasks.len() || heads.heads.len() != tasks.len() {
        return Err(Error::Shape(format!(
            "{} weights and {} heads for {} tasks",
            weights.len(),
            heads.heads.len(),
            tasks.len()
        )));
    }
    let mut loss = 0.0;
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut grad_z = DenseMatrix::zeros(emb.rows(), state.hidden());
    let mut grad_heads = Vec::with_capacity(tasks.len());
    let mut extra: Option<EncoderGrad> = None;
    let mut kept = Vec::new();
    for (i, ((task, head), &lambda)) in tasks
        .tasks()
        .iter()
        .zip(&heads.heads)
        .zip(weights.as_slice())
        .enumerate()
    {
        let mut task_rng = rng.fork(i as u64);
        let out = task_loss_and_grad(task, graph, state, emb, head, &mut task_rng)?;
        loss += lambda * out.loss;
        per_task.push(out.loss);
        grad_z.axpy(lambda, &out.grad_embeddings)?;
        let mut gh = out.grad_head.clone();
        gh.scale(lambda);
        grad_heads.push(gh);
        if let Some(e) = &out.encoder_grad {
            extra
                .get_or_insert_with(|| EncoderGrad::zeros_like(state))
                .add_scaled(lambda, e);
        }
        if keep_task_outputs {
            kept.push(out);
        }
    }
    Ok(CombinedOutput {
        loss,
        per_task_losses: per_task,
        grad_embeddings: grad_z,
        grad_heads,
        encoder_extra: extra,
        task_outputs: kept,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::encoder::EncoderConfig;

    /// Small connected random graph with Gaussian features.
    pub fn random_graph(n: usize, d: usize, seed: u64) -> Graph {
        let mut rng = RngStream::new(seed);
        let mut edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        for u in 0..n {
            for v in (u + 2)..n {
                if rng.bernoulli(0.25) {
                    edges.push((u, v));
                }
            }
        }
        let data = (0..n * d).map(|_| rng.normal()).collect();
        let labels = (0..n).map(|i| i % 2).collect();
        Graph::new(n, edges, DenseMatrix::from_vec(n, d, data).unwrap(), Some(labels)).unwrap()
    }

    pub fn small_settings() -> TaskSettings {
        TaskSettings {
            clu_parts: 3,
            par_clusters: 3,
            pairsim_pairs: 20,
            pairdis_pairs: 30,
            pairdis_cap: 4,
            dgi_samples: 6,
        }
    }

    pub fn encoder(d: usize, hidden: usize, seed: u64) -> EncoderState {
        let cfg = EncoderConfig {
            hidden,
            ..EncoderConfig::default()
        };
        EncoderState::init(d, &cfg, &mut RngStream::new(seed)).unwrap()
    }
}
