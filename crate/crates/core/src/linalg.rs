//! Dense kernels backed by `faer`.

use faer::{Mat, Par, Side};
use ndarray::Array2;

use crate::spectral::SpectralError;

fn to_faer(a: &Array2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_ndarray(m: faer::MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thread budget for the dense kernels; `0` means every available core.
pub fn set_parallelism(threads: usize) {
    faer::set_global_parallelism(if threads == 1 {
        Par::Seq
    } else {
        Par::rayon(threads)
    });
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a
/// symmetric matrix. Only the lower triangle is read.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), SpectralError> {
    assert!(a.is_square());
    let n = a.nrows();
    if n == 0 {
        return Ok((Vec::new(), Array2::zeros((0, 0))));
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SpectralError::ConvergenceFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::ConvergenceFailure(
            "non-finite eigenvalue".to_owned(),
        ));
    }
    let vectors = to_ndarray(evd.U());
    // faer returns ascending order already; keep the contract explicit.
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    Ok((values, vectors))
}

/// `Q diag(w) Qᵀ` for a square `Q`.
pub fn weighted_gram(q: &Array2<f64>, w: &[f64]) -> Array2<f64> {
    assert_eq!(q.ncols(), w.len());
    let scaled = Mat::from_fn(q.nrows(), q.ncols(), |i, j| q[[i, j]] * w[j]);
    let qf = to_faer(q);
    let out = &scaled * qf.transpose();
    to_ndarray(out.as_ref())
}
