//! Small dense helpers on top of nalgebra's eigen and SVD routines.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .total_cmp(&eig.eigenvalues[i])
            .then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Number of eigenvalues above `RANK_TOL` times the largest one.
pub fn effective_rank(sorted_desc: &DVector<f64>) -> usize {
    let max = sorted_desc.iter().copied().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    sorted_desc.iter().filter(|&&v| v > RANK_TOL * max).count()
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd_desc(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok((
            DMatrix::zeros(r, 0),
            DVector::zeros(0),
            DMatrix::zeros(c, 0),
        ));
    }
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    let s = DVector::from_iterator(k, order.iter().map(|&i| svd.singular_values[i]));
    let u = DMatrix::from_fn(r, k, |row, col| u[(row, order[col])]);
    let v = DMatrix::from_fn(c, k, |row, col| v_t[(order[col], row)]);
    Ok((u, s, v))
}

pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    let (_, s, _) = svd_desc(m)?;
    Ok(s.iter().copied().fold(0.0, f64::max))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}
