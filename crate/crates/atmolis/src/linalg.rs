//! Shared dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with eigenvalues sorted in descending order
/// and eigenvector signs fixed deterministically: the largest-magnitude
/// entry of every eigenvector is made positive (first index wins ties).
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn sorted_symmetric_eigen(mat: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors);
    (values, vectors)
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut idx = 0;
        let mut best = 0.0_f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = i;
            }
        }
        if col[idx] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Singular values of a general matrix, descending.
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

/// Solves `L x = b` for lower-triangular `L` with a matrix right-hand side.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    l.solve_lower_triangular(b)
        .ok_or(Error::SingularFactor { context })
}

/// Solves `Lᵀ x = b` for lower-triangular `L` with a matrix right-hand side.
pub fn solve_lower_transpose(
    l: &DMatrix<f64>,
    b: &DMatrix<f64>,
    context: &'static str,
) -> Result<DMatrix<f64>> {
    l.tr_solve_lower_triangular(b)
        .ok_or(Error::SingularFactor { context })
}

/// Solves `L x = b` for a vector right-hand side.
pub fn solve_lower_vec(l: &DMatrix<f64>, b: &DVector<f64>, context: &'static str) -> Result<DVector<f64>> {
    l.solve_lower_triangular(b)
        .ok_or(Error::SingularFactor { context })
}

/// Solves `Lᵀ x = b` for a vector right-hand side.
pub fn solve_lower_transpose_vec(
    l: &DMatrix<f64>,
    b: &DVector<f64>,
    context: &'static str,
) -> Result<DVector<f64>> {
    l.tr_solve_lower_triangular(b)
        .ok_or(Error::SingularFactor { context })
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
