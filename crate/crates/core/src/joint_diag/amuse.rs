use nalgebra::DMatrix;

use super::{fix_signs, prepare, Method, UnmixingResult, Warning};
use crate::autocovariance::AutocovSet;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;

/// Relative eigenvalue gap below which AMUSE flags a tie.
const TIE_GAP: f64 = 1e-10;

/// AMUSE: eigenvectors of `R_tau`, rows ordered by decreasing eigenvalue.
pub fn amuse(set: &AutocovSet, tau: usize) -> Result<UnmixingResult> {
    if !set.lags().contains(&tau) {
        return Err(Error::InvalidArgument(format!("lag {tau} is not in the autocovariance set")));
    }
    let single = set.restrict(&[tau])?;
    let (w, rs) = prepare(&single)?;
    let (values, vectors) = sym_eigen_desc(&rs[0]);
    let mut u: DMatrix<f64> = vectors.transpose();
    fix_signs(&mut u);

    let p = values.len();
    let range = values[0] - values[p - 1];
    let tie = p > 1 && values.windows(2).any(|v| v[0] - v[1] <= TIE_GAP * range);

    let mut out = UnmixingResult::assemble(&single, u, w, &rs, Method::Amuse, 1, true);
    if tie {
        out.warnings.push(Warning::EigenvalueTie);
    }
    Ok(out)
}
