use nalgebra::DMatrix;

use super::{canonicalize, prepare, t_vector, Method, UnmixingResult};
use crate::autocovariance::AutocovSet;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, polar_factor, sym_eigen_desc};

/// Symmetric SOBI by the fixed-point iteration `U <- (T T')^{-1/2} T`,
/// started from the AMUSE eigenbasis at the smallest lag.
pub fn sobi_symmetric_fixedpoint(
    set: &AutocovSet,
    tol: f64,
    max_iter: usize,
) -> Result<UnmixingResult> {
    let (w, rs) = prepare(set)?;
    let first = set
        .lags()
        .iter()
        .enumerate()
        .min_by_key(|(_, &k)| k)
        .map(|(i, _)| i)
        .expect("prepare checked for lags");
    let (_, vectors) = sym_eigen_desc(&rs[first]);
    run(set, w, rs, vectors.transpose(), tol, max_iter)
}

/// Same iteration from a caller-supplied orthogonal start (rows are `u_j'`
/// in whitened coordinates), e.g. a random rotation when AMUSE ties.
pub fn sobi_symmetric_fixedpoint_from(
    set: &AutocovSet,
    init: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<UnmixingResult> {
    let (w, rs) = prepare(set)?;
    if init.shape() != (set.p(), set.p()) {
        return Err(Error::DimensionMismatch("initial U must be p x p".into()));
    }
    run(set, w, rs, polar_factor(init)?, tol, max_iter)
}

fn run(
    set: &AutocovSet,
    w: DMatrix<f64>,
    rs: Vec<DMatrix<f64>>,
    mut u: DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<UnmixingResult> {
    let p = set.p();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut t = DMatrix::zeros(p, p);
        for j in 0..p {
            let tj = t_vector(&rs, &u.row(j).transpose());
            t.set_row(j, &tj.transpose());
        }
        let mut next = polar_factor(&t)?;
        for j in 0..p {
            if next.row(j).dot(&u.row(j)) < 0.0 {
                next.row_mut(j).neg_mut();
            }
        }
        let delta = max_abs(&(&next - &u));
        u = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let u = canonicalize(&u, &rs);
    Ok(UnmixingResult::assemble(set, u, w, &rs, Method::SymmetricFixedpoint, iterations, converged))
}
