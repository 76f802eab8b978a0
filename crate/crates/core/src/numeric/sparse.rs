use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from raw parts. Column indices within a row must
    /// be strictly increasing.
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indices.len() != values.len() {
            return Err(Error::Shape("inconsistent CSR arrays".into()));
        }
        if indptr[rows] != indices.len() || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Shape("CSR row pointer is not monotone".into()));
        }
        for r in 0..rows {
            let cols_in_row = &indices[indptr[r]..indptr[r + 1]];
            if cols_in_row.iter().any(|&c| c >= cols) || cols_in_row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!("row {r} has invalid column indices")));
            }
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<_> = triplets.to_vec();
        if let Some(&(r, c, _)) = sorted.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::Shape(format!("triplet ({r},{c}) outside {rows}x{cols}")));
        }
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self::new(rows, cols, indptr, indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape(format!(
                "matvec {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }
}

/// Sparse-dense product `sparse * dense`.
pub fn spmm(sparse: &CsrMatrix, dense: &DenseMatrix) -> Result<DenseMatrix> {
    if sparse.cols != dense.rows() {
        return Err(Error::Shape(format!(
            "spmm {}x{} by {}x{}",
            sparse.rows,
            sparse.cols,
            dense.rows(),
            dense.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(sparse.rows, dense.cols());
    for r in 0..sparse.rows {
        let (cols, vals) = sparse.row(r);
        let out_row = out.row_mut(r);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &d) in out_row.iter_mut().zip(dense.row(c)) {
                *o += v * d;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_zero() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(spmm(&CsrMatrix::identity(3), &m).unwrap(), m);
        let zero = CsrMatrix::from_triplets(3, 3, &[]).unwrap();
        assert_eq!(spmm(&zero, &m).unwrap(), DenseMatrix::zeros(3, 2));
    }

    #[test]
    fn swap_permutation() {
        let p = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(spmm(&p, &m).unwrap().as_slice(), &[3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let p = CsrMatrix::identity(3);
        assert!(matches!(spmm(&p, &DenseMatrix::zeros(2, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
    }

    fn sparse_and_dense() -> impl Strategy<Value = (usize, usize, usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
        (1usize..=16, 1usize..=16, 1usize..=16).prop_flat_map(|(r, k, c)| {
            (
                Just(r),
                Just(k),
                Just(c),
                prop::collection::vec((0..r, 0..k, -5.0f64..5.0), 0..48),
                prop::collection::vec(-5.0f64..5.0, k * c),
            )
        })
    }

    proptest! {
        #[test]
        fn spmm_matches_dense_matmul((r, k, c, trip, dense) in sparse_and_dense()) {
            let s = CsrMatrix::from_triplets(r, k, &trip).unwrap();
            let d = DenseMatrix::from_vec(k, c, dense).unwrap();
            let fast = spmm(&s, &d).unwrap();
            let slow = s.to_dense().matmul(&d).unwrap();
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
