//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Sort in place, largest first. Ties keep their incoming order.
pub fn sort_descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// Eigenvalues of a symmetric matrix, largest first.
pub fn symmetric_eigenvalues_desc(m: DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    sort_descending(&mut values);
    values
}

/// Symmetric square root `V diag(√d) Vᵀ` of a positive semi-definite matrix.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&d| d < -1e-12 * scale) {
        return Err(Error::NumericalRank("matrix is not positive semi-definite".into()));
    }
    let roots = eig.eigenvalues.map(|d| d.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Roots of `det(S₁ − l S₂) = 0` for symmetric `S₁` and positive-definite
/// `S₂`, largest first.
///
/// With `S₂ = LLᵀ` the pencil is congruent to the symmetric matrix
/// `L⁻¹S₁L⁻ᵀ`, so the roots are real and come from a symmetric eigensolver.
pub fn pencil_eigenvalues(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = s2.nrows();
    if s2.ncols() != p || s1.nrows() != p || s1.ncols() != p {
        return Err(Error::Contract(format!(
            "pencil matrices must both be {p}×{p}, got {}×{} and {}×{}",
            s1.nrows(),
            s1.ncols(),
            s2.nrows(),
            s2.ncols()
        )));
    }
    let chol = s2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalRank("S₂ is not positive definite".into()))?;
    let l = chol.l();
    let min_pivot = l.diagonal().min();
    let max_pivot = l.diagonal().max();
    if !(min_pivot > 1e-8 * max_pivot) {
        return Err(Error::NumericalRank(format!(
            "S₂ is numerically singular (Cholesky pivot ratio {:.3e})",
            min_pivot / max_pivot
        )));
    }
    let left = l
        .solve_lower_triangular(s1)
        .ok_or_else(|| Error::NumericalRank("triangular solve failed".into()))?;
    let mut core = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::NumericalRank("triangular solve failed".into()))?;
    // L⁻¹S₁L⁻ᵀ is symmetric up to rounding.
    for i in 0..p {
        for j in 0..i {
            let avg = 0.5 * (core[(i, j)] + core[(j, i)]);
            core[(i, j)] = avg;
            core[(j, i)] = avg;
        }
    }
    Ok(symmetric_eigenvalues_desc(core))
}

/// `XXᵀ / m` for a `p × m` data matrix.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.ncols().max(1) as f64;
    let mut g = x * x.transpose();
    g /= m;
    g
}
