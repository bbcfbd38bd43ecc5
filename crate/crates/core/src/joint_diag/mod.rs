//! Unmixing matrix estimation by (approximate) joint diagonalization.
//!
//! All solvers work in whitened coordinates: with `W = S_0^{-1/2}` and
//! `R_k = W S_k W` they look for an orthogonal `U` that makes every `U R_k U'`
//! as diagonal as possible, and return `Gamma = U W`.
//!
//! Row order and signs are fixed after the fact. Symmetric solutions are sorted
//! so that `sum_k (u_j' R_k u_j)^2` is non-increasing, and every row satisfies
//! `u_j' 1 >= 0`. Deflation keeps its extraction order, which is already
//! non-increasing when each stage finds its global maximum. AMUSE sorts by the
//! eigenvalues of `R_tau`.

mod amuse;
mod deflation;
mod jacobi;
mod symmetric;

pub use amuse::amuse;
pub use deflation::sobi_deflation;
pub use jacobi::sobi_symmetric_jacobi;
pub use symmetric::{sobi_symmetric_fixedpoint, sobi_symmetric_fixedpoint_from};

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autocovariance::{whiten_all, whitener, AutocovSet, DEFAULT_WHITENING_EPS};
use crate::error::{Error, Result};

pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-10;
pub const DEFAULT_JACOBI_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_MAX_SWEEPS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 5;

/// Criterion values closer than this count as tied when ordering rows.
const ORDER_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Amuse,
    Deflation,
    SymmetricFixedpoint,
    SymmetricJacobi,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Amuse,
        Method::Deflation,
        Method::SymmetricFixedpoint,
        Method::SymmetricJacobi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Amuse => "amuse",
            Method::Deflation => "deflation",
            Method::SymmetricFixedpoint => "symmetric-fixedpoint",
            Method::SymmetricJacobi => "symmetric-jacobi",
        }
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, Method::SymmetricFixedpoint | Method::SymmetricJacobi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amuse" => Ok(Method::Amuse),
            "deflation" => Ok(Method::Deflation),
            "symmetric-fixedpoint" | "symmetric" => Ok(Method::SymmetricFixedpoint),
            "symmetric-jacobi" | "jacobi" => Ok(Method::SymmetricJacobi),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warning {
    EigenvalueTie,
}

/// Estimated unmixing matrix with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingResult {
    /// `Gamma = U W`.
    pub gamma: DMatrix<f64>,
    /// Orthogonal factor; rows are the `u_j'`.
    pub u: DMatrix<f64>,
    /// `S_0^{-1/2}`.
    pub whitener: DMatrix<f64>,
    pub method: Method,
    /// Lags the estimate was built from.
    pub lags: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// `sum_j sum_k (u_j' R_k u_j)^2`.
    pub objective: f64,
    /// Estimating-equation residual, see [`estimating_residual`].
    pub residual: f64,
    pub warnings: Vec<Warning>,
}

impl UnmixingResult {
    pub fn p(&self) -> usize {
        self.gamma.nrows()
    }

    fn assemble(
        set: &AutocovSet,
        u: DMatrix<f64>,
        w: DMatrix<f64>,
        rs: &[DMatrix<f64>],
        method: Method,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let objective = (0..u.nrows())
            .map(|j| row_criterion(rs, &u.row(j).transpose()))
            .sum();
        let mut out = Self {
            gamma: &u * &w,
            u,
            whitener: w,
            method,
            lags: set.lags().to_vec(),
            iterations,
            converged,
            objective,
            residual: 0.0,
            warnings: Vec::new(),
        };
        out.residual = estimating_residual(&out, set);
        out
    }
}

/// Whitener and whitened autocorrelations, with the shared preconditions.
fn prepare(set: &AutocovSet) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    if set.lags().is_empty() {
        return Err(Error::InvalidArgument("at least one lag is required".into()));
    }
    let w = whitener(&set.s0, DEFAULT_WHITENING_EPS)?;
    let rs = whiten_all(set, &w);
    Ok((w, rs))
}

/// `T(u) = sum_k (u' R_k u) R_k u`.
pub(crate) fn t_vector(rs: &[DMatrix<f64>], u: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for r in rs {
        let ru = r * u;
        out.axpy(u.dot(&ru), &ru, 1.0);
    }
    out
}

/// `sum_k (u' R_k u)^2`.
pub(crate) fn row_criterion(rs: &[DMatrix<f64>], u: &DVector<f64>) -> f64 {
    rs.iter().map(|r| u.dot(&(r * u)).powi(2)).sum()
}

/// Flips every row so that its entries sum to a non-negative value. Rows
/// summing to exactly zero get a positive first non-zero entry.
pub(crate) fn fix_signs(u: &mut DMatrix<f64>) {
    for mut row in u.row_iter_mut() {
        let s: f64 = row.iter().sum();
        let flip = if s != 0.0 {
            s < 0.0
        } else {
            row.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0)
        };
        if flip {
            row.neg_mut();
        }
    }
}

/// Sorts rows by decreasing `key`. Keys within [`ORDER_TIE_TOL`] are broken by
/// comparing `|u|` lexicographically, larger first.
pub(crate) fn order_rows(u: &DMatrix<f64>, key: &[f64]) -> DMatrix<f64> {
    let p = u.nrows();
    let before = |a: usize, b: usize| -> bool {
        if (key[a] - key[b]).abs() > ORDER_TIE_TOL {
            return key[a] > key[b];
        }
        for c in 0..u.ncols() {
            match u[(a, c)].abs().total_cmp(&u[(b, c)].abs()) {
                Ordering::Greater => return true,
                Ordering::Less => return false,
                Ordering::Equal => {}
            }
        }
        false
    };
    // insertion sort: stable and well defined for the non-transitive tie rule
    let mut idx: Vec<usize> = (0..p).collect();
    for i in 1..p {
        let mut j = i;
        while j > 0 && before(idx[j], idx[j - 1]) {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    DMatrix::from_fn(p, u.ncols(), |r, c| u[(idx[r], c)])
}

/// Sorts by criterion and fixes signs.
pub(crate) fn canonicalize(u: &DMatrix<f64>, rs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let key: Vec<f64> = (0..u.nrows())
        .map(|j| row_criterion(rs, &u.row(j).transpose()))
        .collect();
    let mut out = order_rows(u, &key);
    fix_signs(&mut out);
    out
}

/// Residual of the estimating equations, evaluated on the unwhitened `S_k`.
///
/// Symmetric estimators (and AMUSE, with its single lag):
/// `max_{i != j} |g_i' T(g_j) - g_j' T(g_i)| + max_{i,j} |g_i' S_0 g_j - d_ij|`.
/// Deflation: `max_{j < p} || T(g_j) - S_0 (sum_{r <= j} g_r g_r') T(g_j) ||`.
/// Here `T(g) = sum_k (g' S_k g) S_k g`.
pub fn estimating_residual(result: &UnmixingResult, set: &AutocovSet) -> f64 {
    let p = result.p();
    let ss: Vec<&DMatrix<f64>> = result.lags.iter().filter_map(|&k| set.get(k)).collect();
    let gammas: Vec<DVector<f64>> = (0..p).map(|j| result.gamma.row(j).transpose()).collect();
    let t_hat = |g: &DVector<f64>| {
        let mut out = DVector::zeros(p);
        for s in &ss {
            let sg = *s * g;
            out.axpy(g.dot(&sg), &sg, 1.0);
        }
        out
    };
    let ts: Vec<DVector<f64>> = gammas.iter().map(t_hat).collect();

    match result.method {
        Method::Deflation => {
            let mut worst = 0.0_f64;
            let mut proj = DMatrix::zeros(p, p);
            for j in 0..p.saturating_sub(1) {
                proj += &gammas[j] * gammas[j].transpose();
                let r = &ts[j] - &set.s0 * (&proj * &ts[j]);
                worst = worst.max(r.norm());
            }
            worst
        }
        _ => {
            let mut sym = 0.0_f64;
            let mut orth = 0.0_f64;
            for i in 0..p {
                for j in 0..p {
                    if i != j {
                        sym = sym.max((gammas[i].dot(&ts[j]) - gammas[j].dot(&ts[i])).abs());
                    }
                    let d = if i == j { 1.0 } else { 0.0 };
                    orth = orth.max((gammas[i].dot(&(&set.s0 * &gammas[j])) - d).abs());
                }
            }
            sym + orth
        }
    }
}

/// Dispatches to the estimator for `method` with default settings.
/// AMUSE uses the smallest lag of the set.
pub fn separate(set: &AutocovSet, method: Method, seed: u64) -> Result<UnmixingResult> {
    match method {
        Method::Amuse => {
            let tau = *set
                .lags()
                .iter()
                .min()
                .ok_or_else(|| Error::InvalidArgument("at least one lag is required".into()))?;
            amuse(set, tau)
        }
        Method::Deflation => {
            sobi_deflation(set, DEFAULT_FIXED_POINT_TOL, DEFAULT_MAX_ITER, DEFAULT_RESTARTS, seed)
        }
        Method::SymmetricFixedpoint => {
            sobi_symmetric_fixedpoint(set, DEFAULT_FIXED_POINT_TOL, DEFAULT_MAX_ITER)
        }
        Method::SymmetricJacobi => {
            sobi_symmetric_jacobi(set, DEFAULT_JACOBI_TOL, DEFAULT_MAX_SWEEPS)
        }
    }
}
