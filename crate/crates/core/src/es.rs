//! Evolution-strategy search over task weights.
//!
//! A CMA-ES sampler proposes weight vectors in `[0, 1]^n`; every candidate
//! trains a fresh encoder and is scored by the pseudo-homophily of its
//! embeddings.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cluster::{pseudo_homophily, KMeansConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::RngStream;
use crate::tasks::{TaskSet, TaskWeights};
use crate::train::{derive_seed, train, TrainConfig, Trained};

/// CMA-ES over the unit box, maximizing fitness.
///
/// Strategy parameters are the standard defaults for population `λ`:
/// log-rank weights over the best `⌊λ/2⌋`, cumulation constants
/// `c_σ, d_σ, c_c` and covariance learning rates `c_1, c_μ`.
#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    population: usize,
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_cov: DVector<f64>,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    generation: u64,
    seed: u64,
}

/// Eigenvalues below this fraction of the largest are lifted to it.
const MIN_EIGEN_RATIO: f64 = 1e-14;

impl CmaEs {
    pub fn new(mean: Vec<f64>, sigma0: f64, population: usize, seed: u64) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::Config("search space must have at least one dimension".into()));
        }
        if population < 2 {
            return Err(Error::Config(format!("population must be at least 2, got {population}")));
        }
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(Error::Config(format!("initial step size must be positive, got {sigma0}")));
        }
        let n = dim as f64;
        let mu = population / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((population as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(Self {
            dim,
            population,
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            basis: DMatrix::identity(dim, dim),
            scales: DVector::from_element(dim, 1.0),
            path_sigma: DVector::zeros(dim),
            path_cov: DVector::zeros(dim),
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            generation: 0,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Samples from `N(m, σ² C)` clipped to `[0, 1]^n`. The draw depends
    /// only on the seed and the generation counter.
    pub fn ask(&self) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(self.seed).fork(self.generation);
        (0..self.population)
            .map(|_| {
                let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.normal()));
                let y = &self.basis * z.component_mul(&self.scales);
                (&self.mean + y * self.sigma).iter().map(|v| v.clamp(0.0, 1.0)).collect()
            })
            .collect()
    }

    /// Rank-based update from the clipped candidates and their fitness
    /// (higher is better; NaN counts as worst).
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitness: &[f64]) -> Result<()> {
        if candidates.len() != self.population || fitness.len() != self.population {
            return Err(Error::Shape(format!(
                "{} candidates and {} fitness values for population {}",
                candidates.len(),
                fitness.len(),
                self.population
            )));
        }
        if let Some(c) = candidates.iter().find(|c| c.len() != self.dim) {
            return Err(Error::Shape(format!("candidate of length {} in dimension {}", c.len(), self.dim)));
        }
        let score: Vec<f64> = fitness.iter().map(|&f| if f.is_nan() { f64::NEG_INFINITY } else { f }).collect();
        self.generation += 1;
        if score.iter().all(|&f| f == score[0]) {
            // flat fitness carries no ranking information: widen the search
            self.sigma *= (0.2 + self.c_sigma / self.d_sigma).exp();
            return Ok(());
        }
        let mut order: Vec<usize> = (0..self.population).collect();
        // best first; equal fitness keeps candidate order
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));

        let steps: Vec<DVector<f64>> = order[..self.weights.len()]
            .iter()
            .map(|&i| (DVector::from_column_slice(&candidates[i]) - &self.mean) / self.sigma)
            .collect();
        let mut step_w = DVector::zeros(self.dim);
        for (w, y) in self.weights.iter().zip(&steps) {
            step_w += y * *w;
        }
        self.mean += &step_w * self.sigma;

        let inv_sqrt = &self.basis * DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d)) * self.basis.transpose();
        let cs = self.c_sigma;
        self.path_sigma = &self.path_sigma * (1.0 - cs) + (&inv_sqrt * &step_w) * (cs * (2.0 - cs) * self.mu_eff).sqrt();
        let norm_ps = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powi(2 * self.generation as i32);
        let h_sigma = norm_ps / decay.sqrt() < (1.4 + 2.0 / (self.dim as f64 + 1.0)) * self.chi_n;
        let cc = self.c_c;
        let hs = if h_sigma { 1.0 } else { 0.0 };
        self.path_cov = &self.path_cov * (1.0 - cc) + &step_w * (hs * (cc * (2.0 - cc) * self.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, y) in self.weights.iter().zip(&steps) {
            rank_mu += (y * y.transpose()) * *w;
        }
        let rank_one = &self.path_cov * self.path_cov.transpose();
        let old_cov = self.cov.clone();
        self.cov = &old_cov * (1.0 - self.c_1 - self.c_mu)
            + (rank_one + &old_cov * ((1.0 - hs) * cc * (2.0 - cc))) * self.c_1
            + rank_mu * self.c_mu;
        self.sigma *= ((cs / self.d_sigma) * (norm_ps / self.chi_n - 1.0)).exp();
        self.refresh_decomposition();
        Ok(())
    }

    /// Symmetrizes `C`, lifts tiny or negative eigenvalues and caches
    /// `C = B D² Bᵀ`.
    fn refresh_decomposition(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let floor = if top > 0.0 { top * MIN_EIGEN_RATIO } else { 1e-300 };
        let values = eig.eigenvalues.map(|v| if v.is_finite() { v.max(floor) } else { floor });
        let basis = eig.eigenvectors;
        let rebuilt = &basis * DMatrix::from_diagonal(&values) * basis.transpose();
        self.cov = (&rebuilt + rebuilt.transpose()) * 0.5;
        self.scales = values.map(f64::sqrt);
        self.basis = basis;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsConfig {
    pub population: usize,
    pub rounds: usize,
    pub sigma0: f64,
    pub initial_mean: f64,
    /// Number of k-means clusters for pseudo-homophily.
    pub clusters: usize,
    pub train: TrainConfig,
    pub kmeans: KMeansConfig,
    /// Parallel candidate evaluations; 0 uses every available core.
    pub workers: usize,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            population: 8,
            rounds: 40,
            sigma0: 0.3,
            initial_mean: 0.5,
            clusters: 5,
            train: TrainConfig::default(),
            kmeans: KMeansConfig::default(),
            workers: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config(format!("population must be at least 2, got {}", self.population)));
        }
        if self.rounds == 0 {
            return Err(Error::Config("at least one round is required".into()));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::Config(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        if self.clusters < 2 {
            return Err(Error::Config("pseudo-homophily needs at least two clusters".into()));
        }
        Ok(())
    }
}

/// Outcome of training and scoring one weight vector.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub weights: TaskWeights,
    /// Pseudo-homophily, or `-∞` when training diverged.
    pub fitness: f64,
    pub trained: Option<Trained>,
    pub train_ms: f64,
    pub eval_ms: f64,
}

/// Trains a fresh encoder on `weights` and scores its embeddings.
///
/// Every candidate uses the same initialization seed, so candidates differ
/// only through their weights.
pub fn evaluate_candidate(graph: &Graph, tasks: &TaskSet, weights: &TaskWeights, config: &EsConfig, seed: u64) -> Result<(f64, Trained)> {
    let trained = train(graph, tasks, weights, &config.train, seed)?;
    let ph = pseudo_homophily(graph, &trained.embeddings.values, config.clusters, seed, &config.kmeans)?;
    Ok((ph, trained))
}

fn evaluate_timed(graph: &Graph, tasks: &TaskSet, weights: TaskWeights, config: &EsConfig, seed: u64) -> Result<Candidate> {
    let start = Instant::now();
    let trained = match train(graph, tasks, &weights, &config.train, seed) {
        Ok(t) => t,
        Err(Error::NonFinite(msg)) => {
            log::warn!("candidate {:?} diverged: {msg}", weights.as_slice());
            return Ok(Candidate {
                weights,
                fitness: f64::NEG_INFINITY,
                trained: None,
                train_ms: start.elapsed().as_secs_f64() * 1e3,
                eval_ms: 0.0,
            });
        }
        Err(e) => return Err(e),
    };
    let train_ms = start.elapsed().as_secs_f64() * 1e3;
    let start = Instant::now();
    let fitness = pseudo_homophily(graph, &trained.embeddings.values, config.clusters, seed, &config.kmeans)?;
    Ok(Candidate {
        weights,
        fitness,
        trained: Some(trained),
        train_ms,
        eval_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(feature = "parallel")]
fn evaluate_all(
    graph: &Graph,
    tasks: &TaskSet,
    batch: Vec<TaskWeights>,
    config: &EsConfig,
    seed: u64,
) -> Result<Vec<Candidate>> {
    use rayon::prelude::*;
    if config.workers == 1 {
        return batch.into_iter().map(|w| evaluate_timed(graph, tasks, w, config, seed)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    // collect keeps candidate order regardless of completion order
    pool.install(|| {
        batch
            .into_par_iter()
            .map(|w| evaluate_timed(graph, tasks, w, config, seed))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn evaluate_all(
    graph: &Graph,
    tasks: &TaskSet,
    batch: Vec<TaskWeights>,
    config: &EsConfig,
    seed: u64,
) -> Result<Vec<Candidate>> {
    batch.into_iter().map(|w| evaluate_timed(graph, tasks, w, config, seed)).collect()
}

/// Summary of one generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Mean over candidates with finite fitness (NaN if none).
    pub mean_fitness: f64,
    pub best_fitness: f64,
    pub best_so_far: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct EsResult {
    pub generations: Vec<GenerationRecord>,
    pub best_weights: TaskWeights,
    pub best_fitness: f64,
    /// Trained state of the best candidate; `None` only if every candidate
    /// diverged.
    pub best: Option<Trained>,
    pub evaluations: usize,
}

/// Runs `rounds` generations of ask / evaluate / tell.
///
/// `observe` is called once per candidate, in candidate order, with the
/// running candidate index and the best fitness seen so far (including this
/// candidate).
pub fn run_es<F>(graph: &Graph, tasks: &TaskSet, config: &EsConfig, seed: u64, mut observe: F) -> Result<EsResult>
where
    F: FnMut(usize, &Candidate, f64) -> Result<()>,
{
    config.validate()?;
    let n = tasks.len();
    let mut cma = CmaEs::new(vec![config.initial_mean; n], config.sigma0, config.population, derive_seed(seed, 0, 0))?;
    let train_seed = derive_seed(seed, 1, 0);
    let mut best: Option<Candidate> = None;
    let mut best_fitness = f64::NEG_INFINITY;
    let mut generations = Vec::with_capacity(config.rounds);
    let mut index = 0;
    for generation in 0..config.rounds {
        let points = cma.ask();
        let batch = points
            .iter()
            .map(|p| TaskWeights::new(p.clone()))
            .collect::<Result<Vec<_>>>()?;
        let results = evaluate_all(graph, tasks, batch, config, train_seed)?;
        let fitness: Vec<f64> = results.iter().map(|c| c.fitness).collect();
        let finite: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
        let mean_fitness = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let gen_best = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for cand in results {
            if cand.trained.is_some() && (best.is_none() || cand.fitness > best_fitness) {
                best_fitness = cand.fitness;
                best = Some(cand.clone());
            }
            observe(index, &cand, best_fitness)?;
            index += 1;
        }
        cma.tell(&points, &fitness)?;
        generations.push(GenerationRecord {
            generation,
            mean_fitness,
            best_fitness: gen_best,
            best_so_far: best_fitness,
            sigma: cma.sigma(),
        });
        log::info!(
            "generation {generation}: mean {mean_fitness:.4}, best {gen_best:.4}, best so far {best_fitness:.4}"
        );
    }
    let (best_weights, best_state) = match best {
        Some(c) => (c.weights, c.trained),
        None => (TaskWeights::uniform(n, config.initial_mean)?, None),
    };
    Ok(EsResult {
        generations,
        best_weights,
        best_fitness,
        best: best_state,
        evaluations: index,
    })
}
