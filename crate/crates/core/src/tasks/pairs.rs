use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use crate::error::{Error, Result};
use crate::graph::{bfs_distances, Graph};
use crate::numeric::{dot, RngStream};

/// Cosine similarity; zero if either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

#[derive(PartialEq)]
struct Scored(f64, usize, usize);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            // prefer lower indices among equal similarities
            .then_with(|| (other.1, other.2).cmp(&(self.1, self.2)))
    }
}

/// Node pairs with their raw-feature cosine similarity: half the budget goes
/// to the most similar pairs, the rest to uniformly random pairs. Every pair
/// is stored once as `(u, v)` with `u < v`.
pub fn similarity_pairs(graph: &Graph, num_pairs: usize, seed: u64) -> Result<(Vec<(usize, usize)>, Vec<f64>)> {
    let n = graph.num_nodes();
    if n < 2 {
        return Err(Error::Config("pairwise similarity needs at least two nodes".into()));
    }
    if num_pairs == 0 {
        return Err(Error::Config("pairwise similarity needs at least one pair".into()));
    }
    let feats = graph.features();
    let norms: Vec<f64> = feats.row_iter().map(|r| dot(r, r).sqrt()).collect();
    let sim = |u: usize, v: usize| {
        if norms[u] == 0.0 || norms[v] == 0.0 {
            0.0
        } else {
            dot(feats.row(u), feats.row(v)) / (norms[u] * norms[v])
        }
    };
    let total = n * (n - 1) / 2;
    let mut pairs: Vec<(usize, usize)> = if num_pairs >= total {
        (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect()
    } else {
        let top = num_pairs / 2;
        let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(top + 1);
        if top > 0 {
            for u in 0..n {
                for v in (u + 1)..n {
                    let s = Scored(sim(u, v), u, v);
                    if heap.len() < top {
                        heap.push(Reverse(s));
                    } else if heap.peek().is_some_and(|Reverse(min)| s > *min) {
                        heap.pop();
                        heap.push(Reverse(s));
                    }
                }
            }
        }
        let mut chosen: Vec<(usize, usize)> = heap.into_iter().map(|Reverse(s)| (s.1, s.2)).collect();
        chosen.sort_unstable();
        let mut seen: HashSet<(usize, usize)> = chosen.iter().copied().collect();
        let mut rng = RngStream::new(seed);
        let wanted = num_pairs - chosen.len();
        let mut added = 0;
        let mut attempts = 0;
        while added < wanted && attempts < 20 * num_pairs {
            attempts += 1;
            let u = rng.below(n);
            let v = rng.below(n);
            if u == v {
                continue;
            }
            let p = (u.min(v), u.max(v));
            if seen.insert(p) {
                chosen.push(p);
                added += 1;
            }
        }
        chosen
    };
    pairs.shrink_to_fit();
    let targets = pairs.iter().map(|&(u, v)| sim(u, v)).collect();
    Ok((pairs, targets))
}

/// Node pairs labelled with their hop-distance bucket `min(d, cap) - 1`.
///
/// Pairs come from breadth-first searches rooted at random anchors;
/// unreachable pairs are never sampled. When the budget covers every pair
/// the enumeration is exhaustive.
pub fn distance_pairs(
    graph: &Graph,
    num_pairs: usize,
    cap: usize,
    seed: u64,
) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    let n = graph.num_nodes();
    if cap < 1 {
        return Err(Error::Config("distance cap must be at least one hop".into()));
    }
    if n < 2 || num_pairs == 0 {
        return Err(Error::Config("pairwise distance needs two nodes and a positive budget".into()));
    }
    let unreachable = n + 1;
    let bucket = |d: usize| d.min(cap) - 1;
    let total = n * (n - 1) / 2;
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    if num_pairs >= total {
        for u in 0..n {
            let dist = bfs_distances(graph, u, n);
            for v in (u + 1)..n {
                if dist[v] < unreachable {
                    pairs.push((u, v));
                    labels.push(bucket(dist[v]));
                }
            }
        }
    } else {
        let mut rng = RngStream::new(seed);
        let per_anchor = num_pairs.div_ceil(n).clamp(8, 64);
        let mut seen = HashSet::new();
        for anchor in rng.permutation(n) {
            if pairs.len() >= num_pairs {
                break;
            }
            let dist = bfs_distances(graph, anchor, n);
            let reachable: Vec<usize> = (0..n)
                .filter(|&v| v != anchor && dist[v] < unreachable)
                .collect();
            if reachable.is_empty() {
                continue;
            }
            let take = per_anchor.min(reachable.len()).min(num_pairs - pairs.len());
            for k in rng.sample_distinct(reachable.len(), take) {
                let v = reachable[k];
                let p = (anchor.min(v), anchor.max(v));
                if seen.insert(p) {
                    pairs.push(p);
                    labels.push(bucket(dist[v]));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Config("graph has no pair of connected nodes".into()));
    }
    Ok((pairs, labels))
}
