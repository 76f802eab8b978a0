//! Browser demo. Each export returns a flat `Float64Array` that the page in
//! `www/` draws on a canvas.

use autossl::cluster::{kmeans, soft_assign, KMeansConfig};
use autossl::graph::{homophily, sbm_generate, SbmSpec};
use autossl::numeric::DenseMatrix;
use autossl::theory::{cycle_entry, path_entry, sbm_entry, verify_theorem, CorpusEntry};
use wasm_bindgen::prelude::*;

fn js_err(e: autossl::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn corpus_graph(kind: &str, n: usize, seed: u64) -> autossl::Result<CorpusEntry> {
    match kind {
        "cycle" => cycle_entry(n),
        "path" => path_entry(n),
        _ => sbm_entry(n, 0.6, 0.1, seed),
    }
}

/// Every balanced labeling of a small graph as `[delta, mi, bound, ...]`.
///
/// `kind` is `cycle`, `path` or `sbm`; `n` must be even and at most 16.
#[wasm_bindgen]
pub fn bound_scatter(kind: &str, n: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let entry = corpus_graph(kind, n, seed).map_err(js_err)?;
    let report = verify_theorem(&entry.graph, &entry.labels, 1e-12).map_err(js_err)?;
    Ok(report
        .points
        .iter()
        .flat_map(|p| [p.delta, p.mutual_information, p.bound])
        .collect())
}

/// `[homophily, pseudo_homophily]` for a two-block SBM, clustering the
/// propagated features `ÃX` with k-means.
#[wasm_bindgen]
pub fn sbm_homophily(block: usize, p_in: f64, p_out: f64, noise: f64, k: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let spec = SbmSpec {
        block_sizes: vec![block, block],
        p_in,
        p_out,
        feature_noise: noise,
        noise_dims: 0,
    };
    let graph = sbm_generate(&spec, seed).map_err(js_err)?;
    let labels = graph.labels().expect("generator attaches labels");
    let truth = homophily(&graph, labels).map_err(js_err)?;
    let model = kmeans(graph.propagated_features(), k, seed, &KMeansConfig::default()).map_err(js_err)?;
    let pseudo = homophily(&graph, &model.labels).map_err(js_err)?;
    Ok(vec![truth, pseudo])
}

/// Posterior of each of three 1-D centroids (-1, 0, 1) at `samples` points
/// spread over [-2, 2], as `[x, p0, p1, p2, ...]`.
#[wasm_bindgen]
pub fn soft_assignment_profile(two_sigma_sq: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    if samples < 2 {
        return Err(JsError::new("need at least two samples"));
    }
    let xs: Vec<f64> = (0..samples).map(|i| -2.0 + 4.0 * i as f64 / (samples - 1) as f64).collect();
    let points = DenseMatrix::from_vec(samples, 1, xs.clone()).map_err(js_err)?;
    let centroids = DenseMatrix::from_vec(3, 1, vec![-1.0, 0.0, 1.0]).map_err(js_err)?;
    let post = soft_assign(&points, &centroids, two_sigma_sq).map_err(js_err)?;
    Ok(xs
        .iter()
        .enumerate()
        .flat_map(|(i, &x)| std::iter::once(x).chain(post.row(i).iter().copied()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_stays_under_the_bound() {
        let flat = bound_scatter("cycle", 8, 0).unwrap();
        assert_eq!(flat.len() % 3, 0);
        assert!(!flat.is_empty());
        for p in flat.chunks(3) {
            assert!(p[1] <= p[2] + 1e-12);
        }
    }

    #[test]
    fn assortative_sbm_is_recovered() {
        let h = sbm_homophily(40, 0.3, 0.01, 0.1, 2, 1).unwrap();
        assert!(h[0] > 0.8);
        assert!((h[1] - h[0]).abs() < 0.1);
    }

    #[test]
    fn posteriors_sharpen_as_the_variance_shrinks() {
        let wide = soft_assignment_profile(2.0, 9).unwrap();
        let sharp = soft_assignment_profile(0.001, 9).unwrap();
        // x = -0.5 lies halfway between the first two centroids
        let wide_row = &wide[12..16];
        assert_eq!(wide_row[0], -0.5);
        assert!(wide_row[1] > 0.3 && wide_row[1] < 0.5);
        let sharp_row = &sharp[0..4];
        assert_eq!(sharp_row[0], -2.0);
        assert!(sharp_row[1] > 0.999_999);
        for row in wide.chunks(4) {
            assert!((row[1..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
