use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelVector};
use crate::numeric::RngStream;

const UNASSIGNED: usize = usize::MAX;

/// Balanced topology-driven partition used as `Clu` pseudo-labels.
///
/// Parts are grown one at a time by breadth-first search from a boundary
/// seed (the unassigned node with the fewest unassigned neighbours) until
/// they reach their target size; when a component runs out the search jumps
/// to a new seed. Target sizes differ by at most one.
pub fn balanced_partition(graph: &Graph, num_parts: usize, seed: u64) -> Result<LabelVector> {
    let n = graph.num_nodes();
    if num_parts == 0 || num_parts > n {
        return Err(Error::Config(format!(
            "cannot split {n} nodes into {num_parts} parts"
        )));
    }
    let mut rng = RngStream::new(seed);
    // random rank breaks ties between equally good seeds and neighbour order
    let mut rank = vec![0usize; n];
    for (r, node) in rng.permutation(n).into_iter().enumerate() {
        rank[node] = r;
    }
    let mut open_degree: Vec<usize> = (0..n).map(|u| graph.degree(u)).collect();
    let mut part = vec![UNASSIGNED; n];
    let mut scratch = Vec::new();

    for p in 0..num_parts {
        let target = n / num_parts + usize::from(p < n % num_parts);
        let mut filled = 0;
        let mut queue = VecDeque::new();
        while filled < target {
            let u = match queue.pop_front() {
                Some(u) if part[u] == UNASSIGNED => u,
                Some(_) => continue,
                None => (0..n)
                    .filter(|&u| part[u] == UNASSIGNED)
                    .min_by_key(|&u| (open_degree[u], rank[u]))
                    .expect("targets sum to n"),
            };
            part[u] = p;
            filled += 1;
            scratch.clear();
            for &v in graph.neighbors(u) {
                open_degree[v] -= 1;
                if part[v] == UNASSIGNED {
                    scratch.push(v);
                }
            }
            scratch.sort_by_key(|&v| rank[v]);
            queue.extend(scratch.iter().copied());
        }
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sbm_generate, SbmSpec};
    use crate::numeric::DenseMatrix;

    fn sizes(part: &[usize], k: usize) -> Vec<usize> {
        let mut s = vec![0; k];
        for &p in part {
            s[p] += 1;
        }
        s
    }

    fn path(n: usize) -> Graph {
        Graph::new(n, (0..n - 1).map(|i| (i, i + 1)), DenseMatrix::zeros(n, 1), None).unwrap()
    }

    #[test]
    fn path_splits_in_halves() {
        let part = balanced_partition(&path(10), 2, 3).unwrap();
        assert_eq!(sizes(&part, 2), vec![5, 5]);
        // contiguous halves
        let cuts = part.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(cuts, 1);
    }

    #[test]
    fn one_node_per_part() {
        let part = balanced_partition(&path(7), 7, 0).unwrap();
        let mut sorted = part.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn too_many_parts() {
        assert!(matches!(balanced_partition(&path(4), 5, 0), Err(Error::Config(_))));
    }

    #[test]
    fn separable_components_are_recovered() {
        let g = sbm_generate(
            &SbmSpec {
                block_sizes: vec![30, 30, 30],
                p_in: 0.3,
                p_out: 0.0,
                feature_noise: 0.0,
                noise_dims: 0,
            },
            2,
        )
        .unwrap();
        let part = balanced_partition(&g, 3, 5).unwrap();
        let labels = g.labels().unwrap();
        for b in 0..3 {
            let owners: Vec<usize> = (0..90).filter(|&u| labels[u] == b).map(|u| part[u]).collect();
            assert!(owners.iter().all(|&o| o == owners[0]));
        }
    }

    #[test]
    fn balanced_on_random_graphs() {
        for seed in 0..10 {
            let g = sbm_generate(
                &SbmSpec {
                    block_sizes: vec![17, 23, 11],
                    p_in: 0.1,
                    p_out: 0.02,
                    feature_noise: 0.0,
                    noise_dims: 0,
                },
                seed,
            )
            .unwrap();
            for parts in [2, 3, 7, 10] {
                let part = balanced_partition(&g, parts, seed).unwrap();
                let ceil = 51usize.div_ceil(parts);
                for s in sizes(&part, parts) {
                    assert!(s + 1 >= ceil && s <= ceil, "{parts} parts: size {s}");
                }
                assert_eq!(part, balanced_partition(&g, parts, seed).unwrap());
            }
        }
    }
}
