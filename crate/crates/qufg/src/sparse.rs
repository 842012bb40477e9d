//! Compressed sparse row storage for symmetric matrices.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;

/// CSR matrix with an instrumentation counter for matrix-signal products.
///
/// The counter has relaxed ordering and exists so tests can assert how many
/// sparse products an algorithm performed; it does not affect results.
#[derive(Debug)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    products: AtomicU64,
}

impl Clone for CsrMatrix {
    fn clone(&self) -> Self {
        CsrMatrix {
            n: self.n,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.clone(),
            products: AtomicU64::new(0),
        }
    }
}

impl CsrMatrix {
    /// Build from triplets. Entries must be unique; rows are sorted by
    /// column internally.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for row in &mut rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in row.iter() {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
            products: AtomicU64::new(0),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        match self.indices[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    /// Iterate stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |p| (i, self.indices[p], self.values[p]))
        })
    }

    /// Sparse matrix times dense signal block, `(n x n) . (n x d)`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "signal rows must match matrix size");
        self.products.fetch_add(1, Ordering::Relaxed);
        let d = x.ncols();
        let mut out = Array2::<f64>::zeros((self.n, d));
        for i in 0..self.n {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[p];
                let v = self.values[p];
                for c in 0..d {
                    out[[i, c]] += v * x[[j, c]];
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.n, self.n));
        for (i, j, v) in self.iter() {
            out[[i, j]] = v;
        }
        out
    }

    /// Number of matrix-signal products performed since the last reset.
    pub fn product_count(&self) -> u64 {
        self.products.load(Ordering::Relaxed)
    }

    pub fn reset_product_count(&self) {
        self.products.store(0, Ordering::Relaxed);
    }
}
