//! Separation performance indices for a gain matrix `G = Gamma_hat Omega`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum-weight perfect assignment on a square weight matrix, returned as
/// `assignment[row] = column`. Shortest augmenting paths with potentials,
/// O(n^3).
pub fn max_weight_assignment(weights: &DMatrix<f64>) -> Vec<usize> {
    let n = weights.nrows();
    assert_eq!(n, weights.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    // minimize cost = -weight; 1-based arrays with a virtual column 0
    let cost = |i: usize, j: usize| -weights[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Row-normalized squared gains `g_ij^2 / ||g_i||^2`.
fn normalized_squares(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch("gain matrix must be square".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("gain matrix has non-finite entries".into()));
    }
    let mut out = g.map(|v| v * v);
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let s: f64 = row.iter().sum();
        if !(s > 0.0) {
            return Err(Error::RankDeficient(format!("row {i} of the gain matrix is zero")));
        }
        row /= s;
    }
    Ok(out)
}


/// Minimum distance index
/// `D(G) = (p-1)^{-1/2} inf_C ||C G - I||_F` over matrices `C` with exactly one
/// non-zero per row and column.
///
/// For a fixed pairing of gain rows to identity rows the best scale is
/// analytic, leaving `p - sum_i g_{r(i) i}^2 / ||g_{r(i)}||^2`; the pairing is
/// a maximum-weight assignment. The leftover is summed from the unmatched
/// entries rather than subtracted from `p`, so small indices keep full
/// relative precision. `p = 1` gives 0.
pub fn mdi(g: &DMatrix<f64>) -> Result<f64> {
    let w = normalized_squares(g)?;
    let p = w.nrows();
    if p == 1 {
        return Ok(0.0);
    }
    let assignment = max_weight_assignment(&w);
    let leftover: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| (0..p).filter(|&k| k != j).map(|k| w[(i, k)]).sum::<f64>())
        .sum();
    Ok((leftover / (p as f64 - 1.0)).sqrt().min(1.0))
}

/// The expectation of the limiting law of `T (p-1) D^2` is the sum of the
/// off-diagonal asymptotic variances of `sqrt(T) vec(Gamma_hat Omega - I)`.
/// This is the identity map on that sum; it pairs with
/// [`crate::asymptotics::global_criterion`].
pub fn mdi_expected_limit(offdiag_variance_sum: f64) -> Result<f64> {
    if !(offdiag_variance_sum >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance sum must be non-negative, got {offdiag_variance_sum}"
        )));
    }
    Ok(offdiag_variance_sum)
}

/// Amari index
/// `(1/p) [sum_i sum_j |g_ij| / max_j |g_ij| + sum_j sum_i |g_ij| / max_i |g_ij|] - 2`.
pub fn amari(g: &DMatrix<f64>) -> Result<f64> {
    if !g.is_square() {
        return Err(Error::DimensionMismatch("gain matrix must be square".into()));
    }
    let a = g.abs();
    let p = a.nrows();
    let mut total = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        let m = row.max();
        if !(m > 0.0) {
            return Err(Error::RankDeficient(format!("row {i} of the gain matrix is zero")));
        }
        total += row.sum() / m;
    }
    for (j, col) in a.column_iter().enumerate() {
        let m = col.max();
        if !(m > 0.0) {
            return Err(Error::RankDeficient(format!("column {j} of the gain matrix is zero")));
        }
        total += col.sum() / m;
    }
    Ok(total / p as f64 - 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mdi_identity_and_scaled_permutation() {
        assert_eq!(mdi(&DMatrix::identity(4, 4)).unwrap(), 0.0);
        let g = DMatrix::from_row_slice(3, 3, &[0.0, -2.0, 0.0, 0.0, 0.0, 0.5, 7.0, 0.0, 0.0]);
        assert_eq!(mdi(&g).unwrap(), 0.0);
    }

    #[test]
    fn mdi_hand_example() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let expected = (2.0 - (1.0 / 1.01 + 1.0_f64)).sqrt();
        assert_abs_diff_eq!(mdi(&g).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(mdi(&g).unwrap(), 0.09950, epsilon = 1e-5);
    }

    #[test]
    fn mdi_bounds_and_errors() {
        // all rows identical: worst case
        let g = DMatrix::from_element(3, 3, 1.0);
        assert_abs_diff_eq!(mdi(&g).unwrap(), 1.0, epsilon = 1e-15);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let err = mdi(&z).unwrap_err();
        assert!(err.to_string().starts_with("rank deficient"));
        assert_eq!(mdi(&DMatrix::from_element(1, 1, 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn expected_limit_pass_through() {
        assert_eq!(mdi_expected_limit(10.6).unwrap(), 10.6);
        assert_eq!(mdi_expected_limit(0.0).unwrap(), 0.0);
        assert!(mdi_expected_limit(-1.0).is_err());
    }

    #[test]
    fn amari_examples() {
        assert_eq!(amari(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(amari(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap(), 1.0);
        let sp = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0]);
        assert_eq!(amari(&sp).unwrap(), 0.0);
        assert!(amari(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn amari_depends_on_row_scaling() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        let mut scaled = g.clone();
        scaled.row_mut(0).scale_mut(5.0);
        // row scaling leaves the row terms alone but changes the column terms
        assert!((amari(&g).unwrap() - amari(&scaled).unwrap()).abs() > 1e-3);
        assert_abs_diff_eq!(mdi(&g).unwrap(), mdi(&scaled).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn assignment_small_cases() {
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 0.0, 4.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(max_weight_assignment(&w), vec![1, 0, 2]);
        assert_eq!(max_weight_assignment(&DMatrix::zeros(0, 0)), Vec::<usize>::new());
    }
}
