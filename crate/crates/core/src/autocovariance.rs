//! Symmetrized sample autocovariances, whitening and autocorrelation matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::signal_model::TimeSeriesMatrix;

pub const DEFAULT_WHITENING_EPS: f64 = 1e-12;

fn centered_rows(x: &TimeSeriesMatrix, centered: bool) -> Vec<Vec<f64>> {
    (0..x.p())
        .map(|i| {
            let mut row = x.row(i);
            if centered {
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                row.iter_mut().for_each(|v| *v -= mean);
            }
            row
        })
        .collect()
}

fn lagged_cross(rows: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let p = rows.len();
    let n = rows[0].len() - k;
    if k == 0 {
        let mut s = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum::<f64>()
                    / rows[i].len() as f64;
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        return s;
    }
    // a_ij = sum_t x_{t,i} x_{t+k,j}
    let a = DMatrix::from_fn(p, p, |i, j| {
        rows[i][..n].iter().zip(&rows[j][k..]).map(|(u, v)| u * v).sum::<f64>()
    });
    let d = 2.0 * n as f64;
    DMatrix::from_fn(p, p, |i, j| (a[(i, j)] + a[(j, i)]) / d)
}

/// `S_k = 1/(2(T-k)) sum_{t<=T-k} (x_t x_{t+k}' + x_{t+k} x_t')`; `S_0` uses
/// the plain `1/T` divisor.
pub fn sample_autocov(x: &TimeSeriesMatrix, k: usize, centered: bool) -> Result<DMatrix<f64>> {
    let len = x.len();
    if len < 2 {
        return Err(Error::DimensionMismatch("need at least two time points".into()));
    }
    if k + 2 > len {
        return Err(Error::LagOutOfRange { lag: k, len });
    }
    Ok(lagged_cross(&centered_rows(x, centered), k))
}

/// `S_0` together with the lagged `S_k` for a set of distinct positive lags.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSet {
    pub s0: DMatrix<f64>,
    lags: Vec<usize>,
    lagged: Vec<DMatrix<f64>>,
    /// Series length the matrices were estimated from (0 for population input).
    pub len: usize,
    pub centered: bool,
}

fn check_lags(lags: &[usize]) -> Result<()> {
    for (i, &k) in lags.iter().enumerate() {
        if k == 0 {
            return Err(Error::InvalidArgument("lags must be positive".into()));
        }
        if lags[..i].contains(&k) {
            return Err(Error::DuplicateLag(k));
        }
    }
    Ok(())
}

impl AutocovSet {
    /// Builds a set directly from given matrices, e.g. population values.
    /// Every matrix is symmetrized.
    pub fn from_matrices(
        s0: DMatrix<f64>,
        lags: Vec<usize>,
        lagged: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        check_lags(&lags)?;
        let p = s0.nrows();
        if !s0.is_square() || lagged.len() != lags.len() || lagged.iter().any(|m| m.shape() != (p, p)) {
            return Err(Error::DimensionMismatch("autocovariance matrices must all be p x p".into()));
        }
        Ok(Self {
            s0: linalg::symmetrize(&s0),
            lags,
            lagged: lagged.iter().map(linalg::symmetrize).collect(),
            len: 0,
            centered: false,
        })
    }

    pub fn p(&self) -> usize {
        self.s0.nrows()
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn lagged(&self) -> &[DMatrix<f64>] {
        &self.lagged
    }

    pub fn get(&self, k: usize) -> Option<&DMatrix<f64>> {
        if k == 0 {
            return Some(&self.s0);
        }
        self.lags.iter().position(|&l| l == k).map(|i| &self.lagged[i])
    }

    /// Restricts the set to a subset of its lags.
    pub fn restrict(&self, lags: &[usize]) -> Result<Self> {
        check_lags(lags)?;
        let lagged = lags
            .iter()
            .map(|&k| {
                self.get(k)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("lag {k} not in set")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { s0: self.s0.clone(), lags: lags.to_vec(), lagged, ..*self })
    }
}

pub fn autocov_set(x: &TimeSeriesMatrix, lags: &[usize], centered: bool) -> Result<AutocovSet> {
    check_lags(lags)?;
    let len = x.len();
    if let Some(&k) = lags.iter().find(|&&k| k + 2 > len) {
        return Err(Error::LagOutOfRange { lag: k, len });
    }
    let rows = centered_rows(x, centered);
    Ok(AutocovSet {
        s0: lagged_cross(&rows, 0),
        lags: lags.to_vec(),
        lagged: lags.iter().map(|&k| lagged_cross(&rows, k)).collect(),
        len,
        centered,
    })
}

/// Symmetric inverse square root `S_0^{-1/2}`. `eps` is relative to the
/// largest eigenvalue.
pub fn whitener(s0: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if !s0.is_square() {
        return Err(Error::DimensionMismatch("covariance must be square".into()));
    }
    linalg::sym_inverse_sqrt(s0, eps)
}

/// `R_k = W S_k W` for every lag in the set, in lag order.
pub fn autocorrelations(set: &AutocovSet) -> Result<Vec<DMatrix<f64>>> {
    let w = whitener(&set.s0, DEFAULT_WHITENING_EPS)?;
    Ok(whiten_all(set, &w))
}

pub(crate) fn whiten_all(set: &AutocovSet, w: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    set.lagged.iter().map(|s| linalg::symmetrize(&(w * s * w))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn series(rows: &[&[f64]]) -> TimeSeriesMatrix {
        TimeSeriesMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hand_evaluated_lag_one() {
        let x = series(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(sample_autocov(&x, 1, false).unwrap()[(0, 0)], 4.0);
        // (1 + 4 + 9) / 3
        assert_eq!(sample_autocov(&x, 0, false).unwrap()[(0, 0)], 14.0 / 3.0);
        // centered: (-1, 0, 1) -> lag one products sum to 0
        assert_eq!(sample_autocov(&x, 1, true).unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn zeros_give_zero_matrices() {
        let x = series(&[&[0.0; 6], &[0.0; 6]]);
        for k in 0..5 {
            assert_eq!(sample_autocov(&x, k, true).unwrap(), DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn lag_range_checked() {
        let x = series(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(sample_autocov(&x, 2, false), Err(Error::LagOutOfRange { lag: 2, len: 3 }));
        assert!(matches!(autocov_set(&x, &[1, 1], false), Err(Error::DuplicateLag(1))));
        assert!(matches!(autocov_set(&x, &[5], false), Err(Error::LagOutOfRange { .. })));
    }

    #[test]
    fn set_contents() {
        let x = series(&[&[1.0, -2.0, 0.5, 3.0, 1.0], &[0.0, 1.0, 1.0, -1.0, 2.0]]);
        let empty = autocov_set(&x, &[], true).unwrap();
        assert!(empty.lags().is_empty());
        let one = autocov_set(&x, &[1], false).unwrap();
        assert_eq!(one.get(0).unwrap(), &sample_autocov(&x, 0, false).unwrap());
        assert_eq!(one.get(1).unwrap(), &sample_autocov(&x, 1, false).unwrap());
        assert!(one.get(2).is_none());
    }

    #[test]
    fn whitener_examples() {
        assert_eq!(whitener(&DMatrix::identity(3, 3), 1e-12).unwrap(), DMatrix::identity(3, 3));
        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let w = whitener(&d, 1e-12).unwrap();
        assert!(max_abs(&(w - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]))) < 1e-15);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let w = whitener(&s, 1e-12).unwrap();
        assert!(max_abs(&(&w * &s * &w - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn whitener_rejects_semidefinite() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = whitener(&s, 1e-12).unwrap_err();
        assert!(err.to_string().starts_with("not positive definite"));
    }

    #[test]
    fn autocorrelations_diagonal_case() {
        let sk = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.2]);
        let set = AutocovSet::from_matrices(DMatrix::identity(2, 2), vec![3], vec![sk.clone()]).unwrap();
        assert_eq!(autocorrelations(&set).unwrap(), vec![sk]);
    }

    #[test]
    fn autocorrelations_recover_source_eigenvalues() {
        let omega = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, -0.3, 0.2, 2.0, 0.1, -0.4, 0.3, 1.5]);
        let lam = [0.7, 0.1, -0.4];
        let s0 = &omega * omega.transpose();
        let sk = &omega * DMatrix::from_fn(3, 3, |i, j| if i == j { lam[i] } else { 0.0 }) * omega.transpose();
        let set = AutocovSet::from_matrices(s0, vec![1], vec![sk]).unwrap();
        let r = autocorrelations(&set).unwrap();
        assert_eq!(r[0], r[0].transpose());
        let (vals, _) = crate::linalg::sym_eigen_desc(&r[0]);
        for (v, l) in vals.iter().zip([0.7, 0.1, -0.4]) {
            assert!((v - l).abs() < 1e-12);
        }
    }
}
