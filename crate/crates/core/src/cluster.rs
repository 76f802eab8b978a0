//! k-means, pseudo-homophily and the differentiable homophily loss.
//!
//! The soft assignment is the posterior of an equal-prior Gaussian mixture
//! with fixed variance: `p(c_i | x) ∝ exp(-‖x - c_i‖² / 2σ²)`. The homophily
//! loss averages the L1 disagreement of those posteriors across edges:
//!
//! ```text
//! H = 1 / (k |E|) Σ_i Σ_(u,v)∈E |p(c_i | x_u) - p(c_i | x_v)|
//! ```
//!
//! Centroids are treated as constants when differentiating `H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{homophily, Graph, LabelVector};
use crate::numeric::{squared_distance, DenseMatrix, RngStream};

/// Default `2σ²` of the soft assignment.
pub const DEFAULT_TWO_SIGMA_SQ: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            restarts: 3,
        }
    }
}

/// Result of k-means: centroids, hard assignments and inertia.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: DenseMatrix,
    pub labels: LabelVector,
    pub inertia: f64,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }
}

/// Lloyd's algorithm with k-means++ seeding and single-point refinement;
/// best inertia over restarts.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64, config: &KMeansConfig) -> Result<ClusterModel> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("cannot form {k} clusters from {n} points")));
    }
    if config.max_iter == 0 {
        return Err(Error::Config("k-means needs at least one iteration".into()));
    }
    let root = RngStream::new(seed);
    let mut best: Option<ClusterModel> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = root.fork(restart as u64);
        let model = lloyd(points, k, config.max_iter, &mut rng);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_seeds(points: &DenseMatrix, k: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = points.rows();
    let mut seeds = vec![rng.below(n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(seeds[0])))
        .collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // rounding can leave `pick` on a zero-weight point
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // every point coincides with a seed; any unused index will do
            (0..n).find(|i| !seeds.contains(i)).unwrap_or(0)
        };
        seeds.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(next)));
        }
    }
    seeds
}

fn nearest(point: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &DenseMatrix, k: usize, max_iter: usize, rng: &mut RngStream) -> ClusterModel {
    let (n, d) = points.shape();
    let mut centroids = points.select_rows(&plus_plus_seeds(points, k, rng));
    let mut labels = vec![usize::MAX; n];
    let mut dists = vec![0.0; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let (c, dist) = nearest(points.row(i), &centroids);
            dists[i] = dist;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut counts = vec![0usize; k];
        let mut sums = DenseMatrix::zeros(k, d);
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
                continue;
            }
            // empty cluster: move it onto the point worst served by its centroid
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far.filter(|&i| dists[i] > 0.0) {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                dists[i] = 0.0;
                centroids.row_mut(c).copy_from_slice(points.row(i));
            }
        }
    }
    hartigan_refine(points, &mut labels, &mut centroids, max_iter);
    // final assignment against the final centroids
    let mut inertia = 0.0;
    for i in 0..n {
        let (c, dist) = nearest(points.row(i), &centroids);
        labels[i] = c;
        inertia += dist;
    }
    ClusterModel {
        centroids,
        labels,
        inertia,
    }
}

/// Moves single points between clusters while that lowers the inertia,
/// then resets the centroids to the cluster means. A stable partition is
/// also stable under Lloyd's assignment step.
fn hartigan_refine(points: &DenseMatrix, labels: &mut [usize], centroids: &mut DenseMatrix, max_passes: usize) {
    let (n, d) = points.shape();
    let k = centroids.rows();
    let mut counts = vec![0usize; k];
    for &c in labels.iter() {
        counts[c] += 1;
    }
    for _ in 0..max_passes {
        let mut moved = false;
        for i in 0..n {
            let from = labels[i];
            if counts[from] < 2 {
                continue;
            }
            let x = points.row(i);
            let m = counts[from] as f64;
            let removal = m / (m - 1.0) * squared_distance(x, centroids.row(from));
            let mut target = None;
            let mut best = removal;
            for to in (0..k).filter(|&c| c != from) {
                let m = counts[to] as f64;
                let cost = m / (m + 1.0) * squared_distance(x, centroids.row(to));
                if cost < best * (1.0 - 1e-12) {
                    best = cost;
                    target = Some(to);
                }
            }
            let Some(to) = target else { continue };
            let (mf, mt) = (counts[from] as f64, counts[to] as f64);
            for j in 0..d {
                let v = x[j];
                centroids[(from, j)] = (centroids[(from, j)] * mf - v) / (mf - 1.0);
                centroids[(to, j)] = (centroids[(to, j)] * mt + v) / (mt + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            labels[i] = to;
            moved = true;
        }
        if !moved {
            break;
        }
    }
    let mut sums = DenseMatrix::zeros(k, d);
    for (i, &c) in labels.iter().enumerate() {
        for (s, &v) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for c in (0..k).filter(|&c| counts[c] > 0) {
        let inv = 1.0 / counts[c] as f64;
        for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
            *dst = s * inv;
        }
    }
}

/// Homophily of the graph under k-means cluster ids of the embeddings.
pub fn pseudo_homophily(
    graph: &Graph,
    embeddings: &DenseMatrix,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<f64> {
    let model = kmeans(embeddings, k, seed, config)?;
    homophily(graph, &model.labels)
}

/// Gaussian-mixture posteriors `p(c_i | x)` for every row, shape `N × k`.
pub fn soft_assign(points: &DenseMatrix, centroids: &DenseMatrix, two_sigma_sq: f64) -> Result<DenseMatrix> {
    if points.cols() != centroids.cols() {
        return Err(Error::Shape(format!(
            "points have width {}, centroids {}",
            points.cols(),
            centroids.cols()
        )));
    }
    if !(two_sigma_sq > 0.0) {
        return Err(Error::Config(format!("2σ² must be positive, got {two_sigma_sq}")));
    }
    let k = centroids.rows();
    let mut post = DenseMatrix::zeros(points.rows(), k);
    for (i, x) in points.row_iter().enumerate() {
        let row = post.row_mut(i);
        for (r, c) in row.iter_mut().zip(centroids.row_iter()) {
            *r = squared_distance(x, c);
        }
        // shift by the nearest centroid so the largest term is exp(0) = 1
        let nearest = row.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for r in row.iter_mut() {
            let gap = *r - nearest;
            // inf - inf when every distance overflowed: treat as a tie
            let gap = if gap.is_nan() { 0.0 } else { gap };
            *r = (-gap / two_sigma_sq).exp();
            total += *r;
        }
        for r in row.iter_mut() {
            *r /= total;
        }
    }
    Ok(post)
}

/// `H` and its (sub)gradient with respect to the posteriors. Ties in the L1
/// term get a zero subgradient.
pub fn homophily_loss(graph: &Graph, posteriors: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
    if posteriors.rows() != graph.num_nodes() {
        return Err(Error::Shape(format!(
            "{} posterior rows for {} nodes",
            posteriors.rows(),
            graph.num_nodes()
        )));
    }
    if graph.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let k = posteriors.cols();
    let scale = 1.0 / (k * graph.num_edges()) as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(posteriors.rows(), k);
    for &(u, v) in graph.edges() {
        for i in 0..k {
            let diff = posteriors[(u, i)] - posteriors[(v, i)];
            loss += diff.abs();
            let s = if diff > 0.0 {
                scale
            } else if diff < 0.0 {
                -scale
            } else {
                0.0
            };
            grad[(u, i)] += s;
            grad[(v, i)] -= s;
        }
    }
    Ok((loss * scale, grad))
}

/// `H` evaluated on embeddings, with its gradient `∂H/∂Z` through the soft
/// assignment (centroids held fixed).
pub fn homophily_loss_grad_embeddings(
    graph: &Graph,
    embeddings: &DenseMatrix,
    centroids: &DenseMatrix,
    two_sigma_sq: f64,
) -> Result<(f64, DenseMatrix)> {
    let post = soft_assign(embeddings, centroids, two_sigma_sq)?;
    let (loss, grad_post) = homophily_loss(graph, &post)?;
    let (n, d) = embeddings.shape();
    let k = centroids.rows();
    let mut grad = DenseMatrix::zeros(n, d);
    for i in 0..n {
        let p = post.row(i);
        let gp = grad_post.row(i);
        if gp.iter().all(|&g| g == 0.0) {
            continue;
        }
        // softmax backward: ∂H/∂a_j = p_j (g_j - Σ_l g_l p_l)
        let mean: f64 = p.iter().zip(gp).map(|(a, b)| a * b).sum();
        let x = embeddings.row(i).to_vec();
        let out = grad.row_mut(i);
        for j in 0..k {
            let g_logit = p[j] * (gp[j] - mean);
            if g_logit == 0.0 {
                continue;
            }
            // a_j = -‖x - c_j‖² / 2σ²  ⇒  ∂a_j/∂x = -2 (x - c_j) / 2σ²
            let coef = -2.0 * g_logit / two_sigma_sq;
            for ((o, &xv), &cv) in out.iter_mut().zip(&x).zip(centroids.row(j)) {
                *o += coef * (xv - cv);
            }
        }
    }
    Ok((loss, grad))
}
