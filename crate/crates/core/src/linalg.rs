//! Thin bridge between `ndarray` storage and `nalgebra` decompositions.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut1, Axis};

use crate::error::{Error, Result};

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors as columns (rows × r).
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    /// Right singular vectors as columns (cols × r).
    pub v: Array2<f64>,
}

impl Svd {
    /// Number of singular values above `rel_tol * s_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * smax)
            .count()
    }
}

pub fn thin_svd(a: ArrayView2<f64>) -> Result<Svd> {
    let (r, c) = a.dim();
    if r == 0 || c == 0 {
        return Err(Error::Degenerate("SVD of an empty matrix".into()));
    }
    let svd = nalgebra::linalg::SVD::new(to_dmatrix(a), true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let k = order.len();
    let mut out_u = Array2::zeros((r, k));
    let mut out_v = Array2::zeros((c, k));
    let mut out_s = Array1::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        out_s[dst] = s[src];
        for i in 0..r {
            out_u[[i, dst]] = u[(i, src)];
        }
        for j in 0..c {
            out_v[[j, dst]] = vt[(src, j)];
        }
    }
    Ok(Svd {
        u: out_u,
        singular_values: out_s,
        v: out_v,
    })
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues in decreasing order,
/// eigenvectors as columns.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let eig = nalgebra::linalg::SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vecs[[i, dst]] = eig.eigenvectors[(i, src)];
        }
    }
    (vals, vecs)
}

/// Flip `v` so that its largest-magnitude coefficient is positive. The first
/// index wins among equal magnitudes. Returns true when flipped.
pub fn orient_largest_positive(mut v: ArrayViewMut1<f64>) -> bool {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v.is_empty() || v[best] >= 0.0 {
        return false;
    }
    v.mapv_inplace(|x| -x);
    true
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let chol = nalgebra::linalg::Cholesky::new(to_dmatrix(a))
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    Ok(from_dmatrix(&chol.inverse()))
}

/// Log-determinant of a symmetric positive-definite matrix.
pub fn spd_log_det(a: ArrayView2<f64>) -> Result<f64> {
    let chol = nalgebra::linalg::Cholesky::new(to_dmatrix(a))
        .ok_or_else(|| Error::Degenerate("matrix is not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

pub fn inverse(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    to_dmatrix(a)
        .try_inverse()
        .map(|m| from_dmatrix(&m))
        .ok_or_else(|| Error::Degenerate("singular matrix".into()))
}

/// Column means of a matrix.
pub fn column_means(a: ArrayView2<f64>) -> Array1<f64> {
    a.mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let a = array![
            [1.0, 2.0, 0.5],
            [0.0, 3.0, 1.0],
            [4.0, 1.0, 2.0],
            [1.0, 1.0, 1.0]
        ];
        let svd = thin_svd(a.view()).unwrap();
        let s = &svd.singular_values;
        assert!(s.windows(2).into_iter().all(|w| w[0] >= w[1]));
        let rec = svd.u.dot(&Array2::from_diag(s)).dot(&svd.v.t());
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn orientation_flips_negative_peak() {
        let mut v = array![0.1, -0.9, 0.3];
        assert!(orient_largest_positive(v.view_mut()));
        assert_eq!(v, array![-0.1, 0.9, -0.3]);
        assert!(!orient_largest_positive(v.view_mut()));
    }

    #[test]
    fn spd_inverse_of_diagonal() {
        let a = array![[2.0, 0.0], [0.0, 4.0]];
        let inv = spd_inverse(a.view()).unwrap();
        assert!((inv[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((inv[[1, 1]] - 0.25).abs() < 1e-15);
        assert!((spd_log_det(a.view()).unwrap() - 8f64.ln()).abs() < 1e-12);
    }
}
