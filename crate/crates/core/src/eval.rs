//! Downstream metrics: clustering NMI and a logistic-regression probe.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans, KMeansConfig};
use crate::error::{Error, Result};
use crate::numeric::{DenseMatrix, RngStream};

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information, normalized by the arithmetic mean of the
/// two entropies. Defined as 0 when either labeling has zero entropy.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let n = pred.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut a: HashMap<usize, usize> = HashMap::new();
    let mut b: HashMap<usize, usize> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1;
        *a.entry(p).or_default() += 1;
        *b.entry(t).or_default() += 1;
    }
    let ha = entropy(a.values().copied(), n);
    let hb = entropy(b.values().copied(), n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    let mut cells: Vec<_> = joint.into_iter().collect();
    // fixed summation order keeps the result bitwise reproducible
    cells.sort_unstable();
    let mi: f64 = cells
        .into_iter()
        .map(|((p, t), c)| {
            let pxy = c as f64 / n;
            pxy * (c as f64 * n / (a[&p] * b[&t]) as f64).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

/// Disjoint train / validation / test node sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn new(n: usize, train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in train.iter().chain(&val).chain(&test) {
            if i >= n {
                return Err(Error::Config(format!("split index {i} out of range for {n} nodes")));
            }
            if seen[i] {
                return Err(Error::Config(format!("node {i} appears in more than one split")));
            }
            seen[i] = true;
        }
        Ok(Self { train, val, test })
    }

    /// Random split with the given train and validation fractions; the rest
    /// is test.
    pub fn random(n: usize, train_frac: f64, val_frac: f64, seed: u64) -> Result<Self> {
        if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
            return Err(Error::Config(format!(
                "invalid split fractions {train_frac}/{val_frac}"
            )));
        }
        let perm = RngStream::new(seed).permutation(n);
        let n_train = ((n as f64 * train_frac).round() as usize).max(1);
        let n_val = (n as f64 * val_frac).round() as usize;
        if n_train + n_val >= n {
            return Err(Error::Config(format!("{n} nodes are too few to split")));
        }
        let train = perm[..n_train].to_vec();
        let val = perm[n_train..n_train + n_val].to_vec();
        let test = perm[n_train + n_val..].to_vec();
        Self::new(n, train, val, test)
    }

    /// The default 10% / 10% / 80% split.
    pub fn standard(n: usize, seed: u64) -> Result<Self> {
        Self::random(n, 0.1, 0.1, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub l2: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tolerance: 1e-5,
            max_iter: 2000,
        }
    }
}

/// Multinomial logistic regression `softmax(x W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
    pub iterations: usize,
}

impl ProbeModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let c = self.bias.len();
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..c {
            let s = self.bias[k] + x.iter().enumerate().map(|(j, v)| v * self.weight[(j, k)]).sum::<f64>();
            if s > best.1 {
                best = (k, s);
            }
        }
        best.0
    }

    pub fn accuracy(&self, x: &DenseMatrix, labels: &[usize], idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let hits = idx.iter().filter(|&&i| self.predict(x.row(i)) == labels[i]).count();
        hits as f64 / idx.len() as f64
    }
}

/// Objective gradient at `(w, b)`: mean cross-entropy over `rows` plus
/// `l2/2 ‖w‖²` (bias unpenalized). Returns the flattened gradient.
fn probe_gradient(x: &DenseMatrix, labels: &[usize], rows: &[usize], classes: usize, params: &[f64], l2: f64) -> Vec<f64> {
    let d = x.cols();
    let (w, b) = params.split_at(d * classes);
    let mut grad = vec![0.0; params.len()];
    let inv = 1.0 / rows.len() as f64;
    let mut scores = vec![0.0; classes];
    for &i in rows {
        let xi = x.row(i);
        scores.copy_from_slice(b);
        for (j, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                for (s, wk) in scores.iter_mut().zip(&w[j * classes..(j + 1) * classes]) {
                    *s += v * wk;
                }
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        for s in scores.iter_mut() {
            *s /= total;
        }
        scores[labels[i]] -= 1.0;
        for (j, &v) in xi.iter().enumerate() {
            if v != 0.0 {
                for (g, s) in grad[j * classes..(j + 1) * classes].iter_mut().zip(&scores) {
                    *g += v * s * inv;
                }
            }
        }
        for (g, s) in grad[d * classes..].iter_mut().zip(&scores) {
            *g += s * inv;
        }
    }
    for (g, wv) in grad.iter_mut().zip(w) {
        *g += l2 * wv;
    }
    grad
}

/// Largest eigenvalue of `X̃ᵀX̃ / n` over `rows`, where `X̃` appends a
/// constant column, by power iteration.
fn gram_spectral_radius(x: &DenseMatrix, rows: &[usize]) -> f64 {
    let d = x.cols() + 1;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; d];
        for &i in rows {
            let xi = x.row(i);
            let proj: f64 = xi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[d - 1];
            for (n, &a) in next.iter_mut().zip(xi) {
                *n += a * proj;
            }
            next[d - 1] += proj;
        }
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - lambda).abs() <= 1e-10 * norm;
        lambda = norm;
        for (a, b) in v.iter_mut().zip(&next) {
            *a = b / norm;
        }
        if converged {
            break;
        }
    }
    lambda / rows.len() as f64
}

/// Fits the probe on `train` rows only, with zero initialization and
/// Nesterov-accelerated gradient descent at step `1/L`.
pub fn fit_probe(x: &DenseMatrix, labels: &[usize], train: &[usize], config: &ProbeConfig) -> Result<ProbeModel> {
    if labels.len() != x.rows() {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), x.rows())));
    }
    if train.is_empty() {
        return Err(Error::Evaluation("empty training set".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let first = labels[train[0]];
    if train.iter().all(|&i| labels[i] == first) {
        return Err(Error::Evaluation("training set contains a single class".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("probe features contain non-finite values".into()));
    }
    let d = x.cols();
    // softmax cross-entropy has curvature at most 1/2 along any direction;
    // the 5% margin covers power-iteration underestimation
    let smooth = 0.5 * gram_spectral_radius(x, train) * 1.05 + config.l2;
    let step = if smooth > 0.0 { 1.0 / smooth } else { 1.0 };
    let len = d * classes + classes;
    let mut params = vec![0.0; len];
    let mut prev = params.clone();
    let mut iterations = 0;
    for k in 0..config.max_iter {
        iterations = k + 1;
        let momentum = k as f64 / (k as f64 + 3.0);
        let look: Vec<f64> = params.iter().zip(&prev).map(|(p, q)| p + momentum * (p - q)).collect();
        let grad = probe_gradient(x, labels, train, classes, &look, config.l2);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        prev = std::mem::replace(&mut params, look.iter().zip(&grad).map(|(p, g)| p - step * g).collect());
        if norm < config.tolerance {
            break;
        }
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("probe diverged".into()));
    }
    let bias = params.split_off(d * classes);
    Ok(ProbeModel {
        weight: DenseMatrix::from_vec(d, classes, params)?,
        bias,
        iterations,
    })
}

/// Test accuracy of a logistic-regression probe trained on `split.train`.
pub fn logistic_probe(embeddings: &DenseMatrix, labels: &[usize], split: &Split, config: &ProbeConfig) -> Result<f64> {
    let model = fit_probe(embeddings, labels, &split.train, config)?;
    Ok(model.accuracy(embeddings, labels, &split.test))
}

/// NMI between k-means clusters of the embeddings and the true labels.
pub fn cluster_eval(embeddings: &DenseMatrix, truth: &[usize], k: usize, seed: u64) -> Result<f64> {
    let model = kmeans(embeddings, k, seed, &KMeansConfig::default())?;
    nmi(&model.labels, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct contingency-table oracle with a dense table.
    fn nmi_oracle(a: &[usize], b: &[usize]) -> f64 {
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let n = a.len() as f64;
        let mut table = vec![vec![0.0; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            table[x][y] += 1.0;
        }
        let row: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
        let col: Vec<f64> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let h = |v: &[f64]| -> f64 { v.iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).ln()).sum() };
        let mut mi = 0.0;
        for i in 0..ka {
            for j in 0..kb {
                if table[i][j] > 0.0 {
                    mi += table[i][j] / n * ((table[i][j] / n) / ((row[i] / n) * (col[j] / n))).ln();
                }
            }
        }
        let (ha, hb) = (h(&row), h(&col));
        if ha == 0.0 || hb == 0.0 {
            0.0
        } else {
            mi / ((ha + hb) / 2.0)
        }
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 2]).unwrap(), 0.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_matches_contingency_oracle() {
        let mut rng = RngStream::new(11);
        for _ in 0..50 {
            let a: Vec<usize> = (0..20).map(|_| rng.below(4)).collect();
            let b: Vec<usize> = (0..20).map(|_| rng.below(3)).collect();
            assert!((nmi(&a, &b).unwrap() - nmi_oracle(&a, &b)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn nmi_symmetric_and_permutation_invariant(
            a in proptest::collection::vec(0usize..4, 30),
            b in proptest::collection::vec(0usize..3, 30),
            shift in 1usize..4,
        ) {
            let ab = nmi(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((ab - nmi(&b, &a).unwrap()).abs() < 1e-12);
            let relabeled: Vec<usize> = a.iter().map(|&x| (x + shift) % 4).collect();
            prop_assert!((ab - nmi(&relabeled, &b).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn split_proportions() {
        let s = Split::standard(1000, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (100, 100, 800));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(Split::new(3, vec![0], vec![0], vec![1]).is_err());
        assert!(Split::new(3, vec![0], vec![], vec![5]).is_err());
    }

    fn blobs(n: usize, sep: f64, seed: u64) -> (DenseMatrix, Vec<usize>) {
        let mut rng = RngStream::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let off = if c == 0 { -sep } else { sep };
            rows.push(vec![off + rng.normal(), rng.normal()]);
            labels.push(c);
        }
        (DenseMatrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(200, 6.0, 1);
        let split = Split::standard(200, 2).unwrap();
        let model = fit_probe(&x, &y, &split.train, &ProbeConfig::default()).unwrap();
        assert_eq!(model.accuracy(&x, &y, &split.train), 1.0);
        assert_eq!(logistic_probe(&x, &y, &split, &ProbeConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn shuffled_labels_give_chance() {
        let mut rng = RngStream::new(5);
        let n = 3000;
        let x = DenseMatrix::from_vec(n, 4, (0..n * 4).map(|_| rng.normal()).collect()).unwrap();
        let y: Vec<usize> = (0..n).map(|_| rng.below(3)).collect();
        let split = Split::standard(n, 1).unwrap();
        let acc = logistic_probe(&x, &y, &split, &ProbeConfig::default()).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 0.1, "accuracy {acc}");
    }

    #[test]
    fn duplicated_dimensions_keep_accuracy() {
        let (x, y) = blobs(300, 1.0, 4);
        let wide: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().chain(r).copied().collect()).collect();
        let wide = DenseMatrix::from_rows(&wide).unwrap();
        let split = Split::standard(300, 0).unwrap();
        let cfg = ProbeConfig::default();
        assert_eq!(
            logistic_probe(&x, &y, &split, &cfg).unwrap(),
            logistic_probe(&wide, &y, &split, &cfg).unwrap()
        );
    }

    #[test]
    fn probe_never_reads_held_out_labels() {
        let (x, y) = blobs(100, 1.0, 7);
        let split = Split::standard(100, 3).unwrap();
        let mut corrupted = y.clone();
        for &i in split.val.iter().chain(&split.test) {
            corrupted[i] = 1 - corrupted[i];
        }
        let cfg = ProbeConfig::default();
        assert_eq!(
            fit_probe(&x, &y, &split.train, &cfg).unwrap(),
            fit_probe(&x, &corrupted, &split.train, &cfg).unwrap()
        );
    }

    #[test]
    fn probe_converges_to_stationary_point() {
        let (x, y) = blobs(100, 1.0, 9);
        let train: Vec<usize> = (0..100).collect();
        let cfg = ProbeConfig::default();
        let model = fit_probe(&x, &y, &train, &cfg).unwrap();
        assert!(model.iterations < cfg.max_iter);
        let mut params = model.weight.as_slice().to_vec();
        params.extend(&model.bias);
        let g = probe_gradient(&x, &y, &train, 2, &params, cfg.l2);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-4);
    }

    #[test]
    fn single_class_training_set_rejected() {
        let (x, _) = blobs(10, 1.0, 0);
        let y = vec![0; 10];
        assert!(matches!(
            fit_probe(&x, &y, &[0, 1, 2], &ProbeConfig::default()),
            Err(Error::Evaluation(_))
        ));
    }

    #[test]
    fn cluster_eval_examples() {
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let mut onehot = DenseMatrix::zeros(30, 3);
        for (i, &t) in truth.iter().enumerate() {
            onehot[(i, t)] = 1.0;
        }
        assert!((cluster_eval(&onehot, &truth, 3, 0).unwrap() - 1.0).abs() < 1e-12);
        let same = DenseMatrix::from_vec(30, 2, vec![0.5; 60]).unwrap();
        assert_eq!(cluster_eval(&same, &truth, 3, 0).unwrap(), 0.0);
        let model = kmeans(&onehot, 3, 4, &KMeansConfig::default()).unwrap();
        assert_eq!(cluster_eval(&onehot, &truth, 3, 4).unwrap(), nmi(&model.labels, &truth).unwrap());
    }
}
