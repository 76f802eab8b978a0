//! Upper bound on the mutual information between a binary labeling and the
//! true labels, in terms of their homophily gap, plus an exhaustive checker.
//!
//! All logarithms are natural and `0 · ln 0 = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{homophily, Graph};
use crate::numeric::DenseMatrix;

fn xlogx_ratio(count: f64, ratio: f64) -> f64 {
    if count == 0.0 {
        0.0
    } else {
        count * ratio.ln()
    }
}

fn check_binary(v: &[usize], name: &str) -> Result<()> {
    if let Some(&bad) = v.iter().find(|&&x| x > 1) {
        return Err(Error::Domain(format!("labeling {name} is not binary (found {bad})")));
    }
    Ok(())
}

/// Mutual information of two binary labelings, in nats.
pub fn mutual_information_binary(a: &[usize], b: &[usize]) -> Result<f64> {
    check_binary(a, "A")?;
    check_binary(b, "B")?;
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Domain(format!("labelings of length {} and {}", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let mut cell = [[0usize; 2]; 2];
    for (&x, &y) in a.iter().zip(b) {
        cell[x][y] += 1;
    }
    let row = [cell[0][0] + cell[0][1], cell[1][0] + cell[1][1]];
    let col = [cell[0][0] + cell[1][0], cell[0][1] + cell[1][1]];
    let mut mi = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let c = cell[x][y] as f64;
            if c > 0.0 {
                mi += c / n * (c * n / (row[x] * col[y]) as f64).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Homophily gap in node units: `(h_B - h_A) |E| / (2 d_max)`.
pub fn delta(h_a: f64, h_b: f64, num_edges: usize, d_max: usize) -> Result<f64> {
    if !(h_a < h_b) {
        return Err(Error::Precondition(format!(
            "the bound needs h_A < h_B, got h_A = {h_a}, h_B = {h_b}"
        )));
    }
    if d_max == 0 {
        return Err(Error::Precondition("maximum degree must be at least 1".into()));
    }
    Ok((h_b - h_a) * num_edges as f64 / (2.0 * d_max as f64))
}

/// `U = (1/N) [2Δ ln(4Δ/N) + 2(N/2 - Δ) ln(4(N/2 - Δ)/N)]` for `0 ≤ Δ ≤ N/4`.
pub fn mi_upper_bound(delta: f64, n: usize) -> Result<f64> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Precondition(format!("the bound needs an even, positive N (got {n})")));
    }
    let nf = n as f64;
    if !(0.0..=nf / 4.0).contains(&delta) {
        return Err(Error::Domain(format!("Δ = {delta} outside [0, N/4] = [0, {}]", nf / 4.0)));
    }
    let rest = nf / 2.0 - delta;
    let u = (xlogx_ratio(2.0 * delta, 4.0 * delta / nf) + xlogx_ratio(2.0 * rest, 4.0 * rest / nf)) / nf;
    // exact at the endpoints; clamp rounding noise elsewhere
    Ok(u.max(0.0))
}

/// One balanced labeling inside the bound's domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundPoint {
    pub h_a: f64,
    pub delta: f64,
    pub mutual_information: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub max_degree: usize,
    pub h_b: f64,
    /// Balanced labelings enumerated.
    pub num_labelings: usize,
    /// Labelings with `h_A < h_B` and `Δ ≤ N/4` that were checked.
    pub checked: usize,
    /// Labelings filtered out because `h_A ≥ h_B`.
    pub excluded: usize,
    /// Labelings with `h_A < h_B` but `Δ > N/4`.
    pub out_of_domain: usize,
    pub violations: usize,
    /// Smallest `U - MI` over the checked labelings, if any were checked.
    pub min_gap: Option<f64>,
    /// Whether `U` strictly increases along the observed `h_A` values.
    pub monotone: bool,
    #[serde(skip)]
    pub points: Vec<BoundPoint>,
}

/// Largest graph the exhaustive check accepts.
pub const MAX_EXHAUSTIVE_NODES: usize = 16;

fn balanced_binary(b: &[usize]) -> Result<()> {
    check_binary(b, "B")?;
    let ones = b.iter().filter(|&&x| x == 1).count();
    if 2 * ones != b.len() {
        return Err(Error::Precondition(format!(
            "labels must be balanced: {ones} ones among {} nodes",
            b.len()
        )));
    }
    Ok(())
}

/// Enumerates every balanced binary labeling `A` and checks
/// `MI(A, B) ≤ U(Δ(h_A, h_B))` wherever `h_A < h_B`.
pub fn verify_theorem(graph: &Graph, b: &[usize], tolerance: f64) -> Result<TheoremReport> {
    let n = graph.num_nodes();
    if n % 2 == 1 {
        return Err(Error::Precondition(format!("{n} nodes cannot be split into balanced classes")));
    }
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(Error::Precondition(format!(
            "exhaustive enumeration is limited to {MAX_EXHAUSTIVE_NODES} nodes, graph has {n}"
        )));
    }
    if b.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", b.len())));
    }
    balanced_binary(b)?;
    let h_b = homophily(graph, b)?;
    let mut report = TheoremReport {
        num_nodes: n,
        num_edges: graph.num_edges(),
        max_degree: graph.max_degree(),
        h_b,
        num_labelings: 0,
        checked: 0,
        excluded: 0,
        out_of_domain: 0,
        violations: 0,
        min_gap: None,
        monotone: true,
        points: Vec::new(),
    };
    let mut a = vec![0usize; n];
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != n / 2 {
            continue;
        }
        report.num_labelings += 1;
        for (i, slot) in a.iter_mut().enumerate() {
            *slot = ((mask >> i) & 1) as usize;
        }
        let h_a = homophily(graph, &a)?;
        if h_a >= h_b {
            report.excluded += 1;
            continue;
        }
        let d = delta(h_a, h_b, graph.num_edges(), graph.max_degree())?;
        let Ok(bound) = mi_upper_bound(d, n) else {
            report.out_of_domain += 1;
            continue;
        };
        let mi = mutual_information_binary(&a, b)?;
        report.checked += 1;
        if mi > bound + tolerance {
            report.violations += 1;
        }
        let gap = bound - mi;
        report.min_gap = Some(report.min_gap.map_or(gap, |g: f64| g.min(gap)));
        report.points.push(BoundPoint {
            h_a,
            delta: d,
            mutual_information: mi,
            bound,
        });
    }
    let mut grid: Vec<(f64, f64)> = report.points.iter().map(|p| (p.h_a, p.bound)).collect();
    grid.sort_by(|x, y| x.0.total_cmp(&y.0));
    grid.dedup_by(|x, y| x.0 == y.0);
    report.monotone = grid.windows(2).all(|w| w[0].1 < w[1].1);
    Ok(report)
}

/// Checks that `U` strictly decreases on `points` evenly spaced values of
/// `Δ` in `[0, N/4]`.
pub fn bound_is_decreasing(n: usize, points: usize) -> Result<bool> {
    let top = n as f64 / 4.0;
    let mut prev = f64::INFINITY;
    for i in 0..points {
        let u = mi_upper_bound(top * i as f64 / (points - 1) as f64, n)?;
        if !(u < prev) {
            return Ok(false);
        }
        prev = u;
    }
    Ok(true)
}

/// A small graph with balanced binary reference labels.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub graph: Graph,
    pub labels: Vec<usize>,
}

fn entry(name: &str, n: usize, edges: Vec<(usize, usize)>, labels: Vec<usize>) -> Result<CorpusEntry> {
    let graph = Graph::new(n, edges, DenseMatrix::zeros(n, 1), Some(labels.clone()))?;
    Ok(CorpusEntry {
        name: name.to_string(),
        graph,
        labels,
    })
}

fn halves(n: usize) -> Vec<usize> {
    (0..n).map(|i| usize::from(i >= n / 2)).collect()
}

pub fn cycle_entry(n: usize) -> Result<CorpusEntry> {
    entry(&format!("cycle-{n}"), n, (0..n).map(|i| (i, (i + 1) % n)).collect(), halves(n))
}

pub fn path_entry(n: usize) -> Result<CorpusEntry> {
    entry(&format!("path-{n}"), n, (0..n - 1).map(|i| (i, i + 1)).collect(), halves(n))
}

pub fn complete_entry(n: usize) -> Result<CorpusEntry> {
    let edges = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
    entry(&format!("complete-{n}"), n, edges, halves(n))
}

/// Two-block SBM; the block ids are the reference labels.
pub fn sbm_entry(n: usize, p_in: f64, p_out: f64, seed: u64) -> Result<CorpusEntry> {
    let spec = crate::graph::SbmSpec {
        block_sizes: vec![n / 2, n / 2],
        p_in,
        p_out,
        feature_noise: 0.0,
        noise_dims: 0,
    };
    let graph = crate::graph::sbm_generate(&spec, seed)?;
    let labels = graph.labels().expect("generator attaches labels").to_vec();
    Ok(CorpusEntry {
        name: format!("sbm-{n}-seed{seed}"),
        graph,
        labels,
    })
}

/// Cycles, paths, complete graphs and two-block SBMs with at most 12 nodes.
pub fn default_corpus() -> Result<Vec<CorpusEntry>> {
    Ok(vec![
        cycle_entry(8)?,
        cycle_entry(10)?,
        path_entry(8)?,
        path_entry(12)?,
        complete_entry(4)?,
        complete_entry(6)?,
        sbm_entry(10, 0.7, 0.1, 1)?,
        sbm_entry(12, 0.6, 0.1, 2)?,
        sbm_entry(12, 0.8, 0.2, 3)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    /// Independent evaluation of the bound written as `ln 2 - H(2Δ/N)`, the
    /// binary-entropy form of the same expression.
    fn bound_oracle(delta: f64, n: f64) -> f64 {
        let p = 2.0 * delta / n;
        let h = |q: f64| if q == 0.0 { 0.0 } else { -q * q.ln() };
        LN_2 - (h(p) + h(1.0 - p))
    }

    #[test]
    fn mutual_information_examples() {
        assert!((mutual_information_binary(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(mutual_information_binary(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        // cells: (0,0)=2, (0,1)=1, (1,1)=1; rows 3,1; cols 2,2
        let hand = 0.5 * (4.0f64 / 3.0).ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.25 * 2.0f64.ln();
        let mi = mutual_information_binary(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert!((mi - hand).abs() < 1e-12);
        assert!(matches!(mutual_information_binary(&[0, 2], &[0, 1]), Err(Error::Domain(_))));
        assert!(mutual_information_binary(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn delta_examples() {
        assert!((delta(0.5, 0.9, 10, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(delta(0.5, 0.5 + 1e-12, 10, 2).unwrap() < 1e-10);
        let once = delta(0.2, 0.6, 7, 3).unwrap();
        assert!((delta(0.2, 0.6, 14, 3).unwrap() - 2.0 * once).abs() < 1e-12);
        assert!(matches!(delta(0.6, 0.6, 10, 2), Err(Error::Precondition(_))));
        assert!(delta(0.7, 0.6, 10, 2).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(mi_upper_bound(0.0, 8).unwrap(), LN_2);
        assert_eq!(mi_upper_bound(2.0, 8).unwrap(), 0.0);
        assert_eq!(mi_upper_bound(3.0, 12).unwrap(), 0.0);
        let u = mi_upper_bound(1.0, 8).unwrap();
        assert!((u - bound_oracle(1.0, 8.0)).abs() < 1e-15);
        // frozen from the oracle: ln 2 - H(1/4)
        assert!((u - 0.130_812_035_941_137_3).abs() < 1e-12);
        assert!((u - 0.1309).abs() < 1e-4);
        assert!(matches!(mi_upper_bound(2.5, 8), Err(Error::Domain(_))));
        assert!(mi_upper_bound(1.0, 7).is_err());
    }

    #[test]
    fn bound_is_strictly_decreasing_on_a_fine_grid() {
        for n in [4, 8, 12, 100] {
            assert!(bound_is_decreasing(n, 1000).unwrap());
        }
    }

    proptest! {
        #[test]
        fn bound_matches_entropy_form(half in 1usize..50, frac in 0.0f64..=1.0) {
            let n = 2 * half;
            let d = frac * n as f64 / 4.0;
            prop_assert!((mi_upper_bound(d, n).unwrap() - bound_oracle(d, n as f64)).abs() < 1e-12);
        }

        #[test]
        fn mutual_information_symmetric(bits in proptest::collection::vec(0usize..2, 2..20), other in proptest::collection::vec(0usize..2, 20)) {
            let b = &other[..bits.len()];
            let ab = mutual_information_binary(&bits, b).unwrap();
            prop_assert!((ab - mutual_information_binary(b, &bits).unwrap()).abs() < 1e-15);
            prop_assert!(ab <= LN_2 + 1e-15);
        }
    }

    #[test]
    fn self_information_of_balanced_labeling() {
        let a = [1, 0, 0, 1, 1, 0];
        assert!((mutual_information_binary(&a, &a).unwrap() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn cycle_eight_has_no_violations() {
        let c = cycle_entry(8).unwrap();
        let r = verify_theorem(&c.graph, &c.labels, 1e-12).unwrap();
        assert_eq!(r.num_labelings, 70);
        assert_eq!(r.violations, 0);
        assert_eq!(r.out_of_domain, 0);
        assert!(r.checked > 0);
        assert!(r.monotone);
        // A = B and its complement have h_A = h_B and are filtered
        assert!(r.excluded >= 2);
    }

    #[test]
    fn complete_four_has_no_violations() {
        // every balanced split of a complete graph has the same homophily,
        // so no labeling satisfies h_A < h_B and the check is vacuous
        let c = complete_entry(4).unwrap();
        let r = verify_theorem(&c.graph, &c.labels, 1e-12).unwrap();
        assert_eq!(r.num_labelings, 6);
        assert_eq!(r.violations, 0);
        assert_eq!(r.excluded, 6);
        assert_eq!(r.min_gap, None);
    }

    #[test]
    fn whole_corpus_satisfies_the_bound() {
        let corpus = default_corpus().unwrap();
        assert!(corpus.len() >= 5);
        let mut nonvacuous = 0;
        for c in corpus {
            assert!(c.graph.num_nodes() <= 12);
            let r = verify_theorem(&c.graph, &c.labels, 1e-12).unwrap();
            assert_eq!(r.violations, 0, "{}", c.name);
            assert_eq!(r.out_of_domain, 0, "{}", c.name);
            assert!(r.monotone, "{}", c.name);
            assert!(r.min_gap.is_none_or(|g| g >= -1e-12), "{}", c.name);
            nonvacuous += usize::from(r.checked > 0);
        }
        assert!(nonvacuous >= 5);
    }

    #[test]
    fn odd_or_unbalanced_inputs_rejected() {
        let c = cycle_entry(8).unwrap();
        assert!(matches!(verify_theorem(&c.graph, &[0, 0, 0, 0, 0, 1, 1, 1], 0.0), Err(Error::Precondition(_))));
        let odd = Graph::new(7, (0..6).map(|i| (i, i + 1)), DenseMatrix::zeros(7, 1), None).unwrap();
        assert!(matches!(verify_theorem(&odd, &[0; 7], 0.0), Err(Error::Precondition(_))));
    }
}
