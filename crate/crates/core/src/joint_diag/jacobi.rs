use nalgebra::DMatrix;

use super::{canonicalize, prepare, Method, UnmixingResult};
use crate::autocovariance::AutocovSet;
use crate::error::Result;

pub(crate) struct Sweeps {
    /// Accumulated rotation; `U = V'`.
    pub v: DMatrix<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Criterion before the first sweep and after each sweep.
    #[cfg_attr(not(test), allow(dead_code))]
    pub trace: Vec<f64>,
}

fn diagonal_criterion(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter()
        .map(|a| a.diagonal().iter().map(|d| d * d).sum::<f64>())
        .sum()
}

/// Cyclic Jacobi sweeps for real symmetric joint diagonalization. The angle
/// for pair `(i, j)` maximizes `sum_k (a_ii^2 + a_jj^2)` after the rotation:
/// it is read off the principal eigenvector of `sum_k h_k h_k'` with
/// `h_k = (a_ii - a_jj, a_ij + a_ji)`.
pub(crate) fn jacobi_sweeps(rs: &[DMatrix<f64>], tol: f64, max_sweeps: usize) -> Sweeps {
    let p = rs[0].nrows();
    let mut mats: Vec<DMatrix<f64>> = rs.to_vec();
    let mut v = DMatrix::identity(p, p);
    let mut trace = vec![diagonal_criterion(&mats)];
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < max_sweeps {
        let mut largest = 0.0_f64;
        for i in 0..p {
            for j in i + 1..p {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for a in &mats {
                    let h1 = a[(i, i)] - a[(j, j)];
                    let h2 = a[(i, j)] + a[(j, i)];
                    g11 += h1 * h1;
                    g12 += h1 * h2;
                    g22 += h2 * h2;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                let (s, c) = theta.sin_cos();
                largest = largest.max(s.abs());
                if s.abs() <= tol {
                    continue;
                }
                for a in mats.iter_mut() {
                    for k in 0..p {
                        let (x, y) = (a[(i, k)], a[(j, k)]);
                        a[(i, k)] = c * x + s * y;
                        a[(j, k)] = -s * x + c * y;
                    }
                    for k in 0..p {
                        let (x, y) = (a[(k, i)], a[(k, j)]);
                        a[(k, i)] = c * x + s * y;
                        a[(k, j)] = -s * x + c * y;
                    }
                }
                for k in 0..p {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x + s * y;
                    v[(k, j)] = -s * x + c * y;
                }
            }
        }
        if largest <= tol {
            converged = true;
            break;
        }
        sweeps += 1;
        trace.push(diagonal_criterion(&mats));
    }
    Sweeps { v, sweeps, converged, trace }
}

/// Symmetric SOBI by Jacobi rotations. Stops once no rotation in a sweep has
/// `|sin(angle)|` above `tol`.
pub fn sobi_symmetric_jacobi(
    set: &AutocovSet,
    tol: f64,
    max_sweeps: usize,
) -> Result<UnmixingResult> {
    let (w, rs) = prepare(set)?;
    let sw = jacobi_sweeps(&rs, tol, max_sweeps);
    let u = canonicalize(&sw.v.transpose(), &rs);
    Ok(UnmixingResult::assemble(set, u, w, &rs, Method::SymmetricJacobi, sw.sweeps, sw.converged))
}
