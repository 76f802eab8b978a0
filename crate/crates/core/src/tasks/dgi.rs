use crate::encoder::{backward_propagated, encode_propagated, EncoderState, Embeddings};
use crate::error::Result;
use crate::graph::Graph;
use crate::numeric::{dot, DenseMatrix, RngStream};

use super::{Head, TaskOutput};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Rows `idx` of `Ã X_π`, where `X_π` has its rows shuffled by `perm`.
fn corrupted_rows(graph: &Graph, perm: &[usize], idx: &[usize]) -> DenseMatrix {
    let adj = graph.normalized_adjacency();
    let x = graph.features();
    let mut out = DenseMatrix::zeros(idx.len(), x.cols());
    for (r, &i) in idx.iter().enumerate() {
        let (cols, vals) = adj.row(i);
        let row = out.row_mut(r);
        for (&j, &a) in cols.iter().zip(vals) {
            for (o, &xv) in row.iter_mut().zip(x.row(perm[j])) {
                *o += a * xv;
            }
        }
    }
    out
}

/// Binary cross-entropy between true node embeddings and embeddings of a
/// row-shuffled feature matrix, scored by a bilinear discriminator against
/// the sigmoid of the mean embedding.
pub(super) fn contrastive_loss(
    graph: &Graph,
    state: &EncoderState,
    emb: &Embeddings,
    head: &Head,
    samples: usize,
    rng: &mut RngStream,
) -> Result<TaskOutput> {
    let n = graph.num_nodes();
    let h = state.hidden();
    let z = &emb.values;
    let perm = rng.permutation(n);
    let (pos, neg): (Vec<usize>, Vec<usize>) = if n <= samples {
        ((0..n).collect(), (0..n).collect())
    } else {
        (rng.sample_distinct(n, samples), rng.sample_distinct(n, samples))
    };
    let corrupted_input = corrupted_rows(graph, &perm, &neg);
    let corrupted = encode_propagated(&corrupted_input, state)?;

    let mean = z.column_means();
    let summary: Vec<f64> = mean.iter().map(|&m| sigmoid(m)).collect();
    // v = W s
    let v: Vec<f64> = (0..h).map(|r| dot(head.weight.row(r), &summary)).collect();
    let b = head.bias[0];
    let inv = 1.0 / (pos.len() + neg.len()) as f64;

    let mut loss = 0.0;
    let mut grad_z = DenseMatrix::zeros(n, h);
    let mut grad_neg = DenseMatrix::zeros(neg.len(), h);
    // Σ ∂ℓ/∂logit · z over all scored rows
    let mut weighted = vec![0.0; h];
    let mut grad_b = 0.0;
    for &i in &pos {
        let l = dot(z.row(i), &v) + b;
        loss += softplus(-l);
        let g = (sigmoid(l) - 1.0) * inv;
        grad_b += g;
        for ((w, gz), (&zv, &vv)) in weighted.iter_mut().zip(grad_z.row_mut(i)).zip(z.row(i).iter().zip(&v)) {
            *w += g * zv;
            *gz += g * vv;
        }
    }
    for (r, zt) in corrupted.values.row_iter().enumerate() {
        let l = dot(zt, &v) + b;
        loss += softplus(l);
        let g = sigmoid(l) * inv;
        grad_b += g;
        for ((w, gz), (&zv, &vv)) in weighted.iter_mut().zip(grad_neg.row_mut(r)).zip(zt.iter().zip(&v)) {
            *w += g * zv;
            *gz += g * vv;
        }
    }
    // ∂/∂W = weighted ⊗ s, ∂/∂s = Wᵀ weighted
    let mut grad_w = DenseMatrix::zeros(h, h);
    let mut grad_s = vec![0.0; h];
    for r in 0..h {
        let wr = weighted[r];
        for c in 0..h {
            grad_w[(r, c)] = wr * summary[c];
            grad_s[c] += head.weight[(r, c)] * wr;
        }
    }
    // s = σ(mean Z): every row receives ∂/∂s ⊙ s(1-s) / N
    let per_row: Vec<f64> = grad_s
        .iter()
        .zip(&summary)
        .map(|(g, s)| g * s * (1.0 - s) / n as f64)
        .collect();
    for i in 0..n {
        for (gz, p) in grad_z.row_mut(i).iter_mut().zip(&per_row) {
            *gz += p;
        }
    }
    let encoder_grad = backward_propagated(&corrupted_input, state, &corrupted, &grad_neg)?;
    Ok(TaskOutput {
        loss: loss * inv,
        grad_embeddings: grad_z,
        grad_head: Head {
            weight: grad_w,
            bias: vec![grad_b],
        },
        encoder_grad: Some(encoder_grad),
    })
}
