//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `(m + m') / 2`, which is bit-exactly symmetric.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
/// Eigenvectors are the columns of the returned matrix.
pub(crate) fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = symmetrize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Symmetric inverse square root. Eigenvalues at or below `eps_rel` times the
/// largest one are rejected.
pub(crate) fn sym_inverse_sqrt(s: &DMatrix<f64>, eps_rel: f64) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen_desc(s);
    let max = values.first().copied().unwrap_or(0.0);
    let min = values.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || min <= eps_rel * max {
        return Err(Error::NotPositiveDefinite { min, max });
    }
    let scaled = DMatrix::from_fn(s.nrows(), s.ncols(), |r, c| {
        vectors[(r, c)] / values[c].sqrt()
    });
    Ok(symmetrize(&(&scaled * vectors.transpose())))
}

/// Orthogonal polar factor `(t t')^{-1/2} t`, computed through the SVD.
pub(crate) fn polar_factor(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = t.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-13 * smax {
        return Err(Error::DegenerateTemporalStructure);
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V'");
    Ok(u * v_t)
}

pub(crate) fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    m.clone().try_inverse().ok_or(Error::SingularMatrix)
}

/// Unit vector orthogonal to the given orthonormal vectors (`rows.len() < p`).
pub(crate) fn complete_basis(rows: &[DVector<f64>], p: usize) -> DVector<f64> {
    let project = |v: &DVector<f64>| {
        let mut out = v.clone();
        for r in rows {
            let c = r.dot(&out);
            out.axpy(-c, r, 1.0);
        }
        out
    };
    let mut best = DVector::zeros(p);
    let mut best_norm = -1.0;
    for i in 0..p {
        let cand = project(&DVector::from_fn(p, |r, _| if r == i { 1.0 } else { 0.0 }));
        let n = cand.norm();
        if n > best_norm {
            best_norm = n;
            best = cand;
        }
    }
    // second pass against cancellation
    let v = project(&(best / best_norm));
    let n = v.norm();
    v / n
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
