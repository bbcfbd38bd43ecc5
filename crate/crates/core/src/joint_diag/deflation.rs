use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{fix_signs, prepare, row_criterion, t_vector, Method, UnmixingResult};
use crate::autocovariance::AutocovSet;
use crate::error::Result;
use crate::linalg::{complete_basis, sym_eigen_desc};

struct RowRun {
    u: DVector<f64>,
    criterion: f64,
    iterations: usize,
    converged: bool,
}

fn project_out(v: &mut DVector<f64>, rows: &[DVector<f64>]) {
    for r in rows {
        let c = r.dot(v);
        v.axpy(-c, r, 1.0);
    }
}

fn iterate_row(
    rs: &[DMatrix<f64>],
    found: &[DVector<f64>],
    mut u: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> RowRun {
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = t_vector(rs, &u);
        project_out(&mut next, found);
        let n = next.norm();
        if !(n > 0.0) {
            break;
        }
        next /= n;
        let delta = (&next - &u).norm();
        u = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    RowRun { criterion: row_criterion(rs, &u), u, iterations, converged }
}

/// Deflation-based SOBI. Rows `1..p-1` are extracted one at a time by the
/// projected fixed point `u <- (I - sum_{i<j} u_i u_i') T(u)`, keeping the
/// largest criterion over several starts; the last row completes the
/// orthonormal basis.
///
/// The starts for each row are the eigenvectors of every whitened `R_k`
/// (projected off the rows already found) followed by `restarts` random
/// vectors. The eigenvector starts move with the data under a change of
/// coordinates, so the estimate stays affine equivariant whenever one of
/// them reaches the global maximum.
pub fn sobi_deflation(
    set: &AutocovSet,
    tol: f64,
    max_iter: usize,
    restarts: usize,
    seed: u64,
) -> Result<UnmixingResult> {
    let (w, rs) = prepare(set)?;
    let p = set.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut iterations = 0;
    let mut converged = true;

    let eigen_starts: Vec<DVector<f64>> = rs
        .iter()
        .flat_map(|r| {
            let (_, vectors) = sym_eigen_desc(r);
            vectors.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>()
        })
        .collect();

    for _ in 0..p.saturating_sub(1) {
        let mut best: Option<RowRun> = None;
        let random = (0..restarts).map(|_| DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng)));
        let starts: Vec<DVector<f64>> = eigen_starts.iter().cloned().chain(random).collect();
        for mut start in starts {
            project_out(&mut start, &found);
            let n = start.norm();
            if !(n > 1e-8) {
                continue;
            }
            let run = iterate_row(&rs, &found, start / n, tol, max_iter);
            iterations += run.iterations;
            if best.as_ref().is_none_or(|b| run.criterion > b.criterion) {
                best = Some(run);
            }
        }
        let best = best.unwrap_or_else(|| RowRun {
            u: complete_basis(&found, p),
            criterion: 0.0,
            iterations: 0,
            converged: false,
        });
        converged &= best.converged;
        found.push(best.u);
    }
    found.push(complete_basis(&found, p));

    let mut u = DMatrix::from_fn(p, p, |r, c| found[r][c]);
    fix_signs(&mut u);
    Ok(UnmixingResult::assemble(set, u, w, &rs, Method::Deflation, iterations, converged))
}
