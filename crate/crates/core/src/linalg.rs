//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Generalized symmetric eigenproblem A v = μ B v with B positive definite.
/// Eigenvalues ascend; eigenvectors are B-orthonormal columns.
pub fn sym_gen_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::EigenFailure("shape mismatch".into()));
    }
    let l = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::EigenFailure("right-hand matrix not positive definite".into()))?
        .l();
    let li_a = l.solve_lower_triangular(a).ok_or_else(|| Error::EigenFailure("triangular solve".into()))?;
    let c = l
        .solve_lower_triangular(&li_a.transpose())
        .ok_or_else(|| Error::EigenFailure("triangular solve".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric eigen-solve did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut y = DMatrix::zeros(a.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        y.set_column(k, &eig.eigenvectors.column(i));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::EigenFailure("back substitution".into()))?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    Ok((values, vectors))
}

/// Smallest eigenvalue of A v = μ B v.
pub fn smallest_gen_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_gen_eigen(a, b)?.0[0])
}
