use ndarray::{Array2, ArrayView2, Axis};

/// Node feature matrix, stored row-compressed when mostly zero.
///
/// Bag-of-words inputs such as citation features are ~1% dense, so the first
/// layer's `X W` and the gradient `Xᵀ G` are far cheaper in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense(Array2<f64>),
    Sparse(SparseRows),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(x: ArrayView2<'_, f64>) -> Self {
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in x.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self {
            n_rows: x.nrows(),
            n_cols: x.ncols(),
            offsets,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }
}

impl FeatureMatrix {
    /// Picks sparse storage when at most a fifth of the entries are non-zero.
    pub fn new(x: &Array2<f64>) -> Self {
        let nnz = x.iter().filter(|&&v| v != 0.0).count();
        if nnz * 5 <= x.len() {
            FeatureMatrix::Sparse(SparseRows::from_dense(x.view()))
        } else {
            FeatureMatrix::Dense(x.clone())
        }
    }

    pub fn dense(x: Array2<f64>) -> Self {
        FeatureMatrix::Dense(x)
    }

    pub fn nrows(&self) -> usize {
        match self {
            FeatureMatrix::Dense(x) => x.nrows(),
            FeatureMatrix::Sparse(s) => s.n_rows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            FeatureMatrix::Dense(x) => x.ncols(),
            FeatureMatrix::Sparse(s) => s.n_cols,
        }
    }

    /// Rows `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        match self {
            FeatureMatrix::Dense(x) => FeatureMatrix::Dense(x.select(Axis(0), idx)),
            FeatureMatrix::Sparse(s) => {
                let mut offsets = vec![0];
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                for &i in idx {
                    for (c, v) in s.row(i) {
                        cols.push(c);
                        vals.push(v);
                    }
                    offsets.push(cols.len());
                }
                FeatureMatrix::Sparse(SparseRows {
                    n_rows: idx.len(),
                    n_cols: s.n_cols,
                    offsets,
                    cols,
                    vals,
                })
            }
        }
    }

    /// `X W`.
    pub fn matmul(&self, w: &Array2<f64>) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(x) => x.dot(w),
            FeatureMatrix::Sparse(s) => {
                assert_eq!(s.n_cols, w.nrows());
                let mut out = Array2::zeros((s.n_rows, w.ncols()));
                for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
                    for (c, v) in s.row(i) {
                        out_row.scaled_add(v, &w.row(c));
                    }
                }
                out
            }
        }
    }

    /// `Xᵀ G`.
    pub fn t_matmul(&self, g: &Array2<f64>) -> Array2<f64> {
        match self {
            FeatureMatrix::Dense(x) => x.t().dot(g),
            FeatureMatrix::Sparse(s) => {
                assert_eq!(s.n_rows, g.nrows());
                let mut out = Array2::zeros((s.n_cols, g.ncols()));
                for i in 0..s.n_rows {
                    let g_row = g.row(i);
                    for (c, v) in s.row(i) {
                        out.row_mut(c).scaled_add(v, &g_row);
                    }
                }
                out
            }
        }
    }
}
