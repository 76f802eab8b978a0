use autossl::cluster::{kmeans, KMeansConfig};
use autossl::numeric::{DenseMatrix, RngStream};
use proptest::prelude::*;

/// Minimum two-cluster inertia over every bipartition of the rows.
fn exhaustive_two_means(points: &DenseMatrix) -> f64 {
    let (n, d) = points.shape();
    let mut best = f64::INFINITY;
    // node 0 stays in the first cluster to skip mirrored masks
    for mask in 0u32..(1 << (n - 1)) {
        let side = |i: usize| i > 0 && (mask >> (i - 1)) & 1 == 1;
        if (0..n).all(side) || !(0..n).any(side) {
            continue;
        }
        let mut total = 0.0;
        for s in [false, true] {
            let members: Vec<usize> = (0..n).filter(|&i| side(i) == s).collect();
            for j in 0..d {
                let mean = members.iter().map(|&i| points[(i, j)]).sum::<f64>() / members.len() as f64;
                total += members.iter().map(|&i| (points[(i, j)] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(total);
    }
    best
}

fn instance(n: usize, d: usize, seed: u64) -> DenseMatrix {
    let mut rng = RngStream::new(seed);
    let data = (0..n * d).map(|_| rng.normal()).collect();
    DenseMatrix::from_vec(n, d, data).unwrap()
}

#[test]
fn two_means_matches_exhaustive_partition() {
    let config = KMeansConfig {
        restarts: 10,
        ..KMeansConfig::default()
    };
    for n in 3..=8 {
        for d in 1..=3 {
            for seed in 0..25 {
                let points = instance(n, d, seed * 31 + n as u64);
                let model = kmeans(&points, 2, seed, &config).unwrap();
                let optimum = exhaustive_two_means(&points);
                assert!(
                    (model.inertia - optimum).abs() < 1e-9,
                    "n={n} d={d} seed={seed}: {} vs {optimum}",
                    model.inertia
                );
            }
        }
    }
}

#[test]
fn oracle_on_hand_instance() {
    // {0, 1} and {10, 12}: 0.5 + 2
    let points = DenseMatrix::from_vec(4, 1, vec![0.0, 1.0, 10.0, 12.0]).unwrap();
    assert!((exhaustive_two_means(&points) - 2.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn inertia_never_beats_the_optimum(n in 2usize..=8, seed in 0u64..1000) {
        let points = instance(n, 2, seed);
        let model = kmeans(&points, 2, seed, &KMeansConfig::default()).unwrap();
        prop_assert!(model.inertia >= exhaustive_two_means(&points) - 1e-9);
    }
}

