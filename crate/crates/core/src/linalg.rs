//! Dense linear-algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;

/// Relative tolerance below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Singular value decomposition with singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: DVector<f64>,
    /// Right singular vectors as columns.
    pub v: Matrix,
}

impl Svd {
    pub fn new(m: &Matrix) -> Self {
        let (rows, cols) = m.shape();
        let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
        let svd = fm.thin_svd().expect("SVD did not converge");
        let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
        let k = fs.nrows();

        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]).then(a.cmp(&b)));
        Svd {
            u: Matrix::from_fn(rows, k, |i, c| fu[(i, order[c])]),
            singular_values: DVector::from_fn(k, |c, _| fs[order[c]]),
            v: Matrix::from_fn(cols, k, |j, c| fv[(j, order[c])]),
        }
    }

    /// Number of singular values above `rel_tol * sigma_1`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        numeric_rank(self.singular_values.as_slice(), rel_tol)
    }

    /// Recomposes `U diag(s) V^T` from the leading `s.len()` triplets.
    pub fn recompose_with(&self, s: &[f64]) -> Matrix {
        let k = s.len();
        let mut us = self.u.columns(0, k).into_owned();
        for (c, &sigma) in s.iter().enumerate() {
            us.column_mut(c).scale_mut(sigma);
        }
        us * self.v.columns(0, k).transpose()
    }
}

pub fn numeric_rank(s: &[f64], rel_tol: f64) -> usize {
    match s.first() {
        Some(&s1) if s1 > 0.0 => s.iter().take_while(|&&x| x > rel_tol * s1).count(),
        _ => 0,
    }
}

/// Orthonormal factor of a thin QR with the diagonal of R forced positive.
pub fn orthonormal_factor(a: Matrix) -> Matrix {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..q.ncols() {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let m = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let svd = Svd::new(&m);
        for (a, b) in svd.singular_values.iter().zip([5.0, 3.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = svd.recompose_with(svd.singular_values.as_slice());
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_reconstructs() {
        for n in [5, 7, 100] {
            let m = Matrix::from_element(n, n, 1.0);
            let svd = Svd::new(&m);
            assert!((svd.singular_values[0] - n as f64).abs() < 1e-10);
            assert_eq!(svd.rank(RANK_TOL), 1);
            let back = svd.recompose_with(&svd.singular_values.as_slice()[..1]);
            assert!((back - &m).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_counts_relative_to_top() {
        assert_eq!(numeric_rank(&[2.0, 1.0, 1e-9], RANK_TOL), 2);
        assert_eq!(numeric_rank(&[0.0, 0.0], RANK_TOL), 0);
        assert_eq!(numeric_rank(&[], RANK_TOL), 0);
    }

    #[test]
    fn qr_factor_has_positive_r_diagonal() {
        let a = Matrix::from_row_slice(3, 2, &[-1.0, 2.0, 0.0, 1.0, 1.0, -3.0]);
        let q = orthonormal_factor(a.clone());
        let r = q.transpose() * &a;
        assert!(r[(0, 0)] > 0.0 && r[(1, 1)] > 0.0);
        assert!((q.transpose() * &q - Matrix::identity(2, 2)).norm() < 1e-12);
    }
}
