//! Limiting variances of the SOBI unmixing estimates for MA(inf) sources.
//!
//! Sources are `z_t = sum_j Psi_j eps_{t-j}` with diagonal `Psi_j` and iid
//! innovations whose fourth moments are `beta_ii = E(eps_i^4)` and
//! `beta_ij = E(eps_i^2 eps_j^2)`. With `psi_t` the diagonal of `Psi_t`,
//!
//! ```text
//! F_k = sum_t psi_t psi_{t+k}'        lambda_kj = (F_k)_jj
//! ```
//!
//! and `D_lm` holds the limiting covariances of `sqrt(T) (S_l)_ij` and
//! `sqrt(T) (S_m)_ij`. With `c_ij(s) = sum_h lambda_hi lambda_{h+s,j}`:
//!
//! ```text
//! (D_lm)_ii = (beta_ii - 3) lambda_li lambda_mi + c_ii(l - m) + c_ii(l + m)
//! (D_lm)_ij = 1/2 (c_ij(l - m) + c_ij(l + m))
//!             + (beta_ij - 1) (F_l + F_l')_ij (F_m + F_m')_ij        i != j
//! ```
//!
//! Both cross terms come from the two orderings inside the symmetrized lagged
//! product. All sums are finite because the psi-weights are truncated.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::autocovariance::AutocovSet;
use crate::error::{Error, Result};
use crate::joint_diag::{Method, UnmixingResult};
use crate::linalg::inverse;
use crate::signal_model::{MaExpansion, TimeSeriesMatrix};

/// Relative tolerance for the identifiability checks.
const IDENTIFIABILITY_TOL: f64 = 1e-12;

/// `beta_ii = 3`, `beta_ij = 1`: Gaussian innovations.
pub fn normal_beta(p: usize) -> DMatrix<f64> {
    independent_beta(&vec![3.0; p])
}

/// Independent innovations: `beta_ij = 1` off the diagonal and the given
/// fourth moments on it.
pub fn independent_beta(fourth_moments: &[f64]) -> DMatrix<f64> {
    let p = fourth_moments.len();
    DMatrix::from_fn(p, p, |i, j| if i == j { fourth_moments[i] } else { 1.0 })
}

/// Smallest `kmax` accepted by [`AsymptoticModel::build`].
pub fn required_horizon(expansions: &[MaExpansion], lags: &[usize]) -> usize {
    let support = expansions.iter().map(MaExpansion::len).max().unwrap_or(0);
    support + lags.iter().copied().max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticModel {
    lags: Vec<usize>,
    beta: DMatrix<f64>,
    kmax: usize,
    /// `F_0, ..., F_kmax`; `F_{-k} = F_k'` and `F_k = 0` beyond `kmax`.
    f: Vec<DMatrix<f64>>,
}

impl AsymptoticModel {
    /// Assembles `F_k` from normalized psi-weights.
    pub fn build(
        expansions: &[MaExpansion],
        lags: &[usize],
        beta: DMatrix<f64>,
        kmax: usize,
    ) -> Result<Self> {
        let p = expansions.len();
        if p == 0 {
            return Err(Error::InvalidArgument("no components".into()));
        }
        check_lags(lags)?;
        check_beta(&beta, p)?;
        let required = required_horizon(expansions, lags);
        if kmax < required {
            return Err(Error::HorizonTooSmall { required, given: kmax });
        }
        for e in expansions {
            let norm: f64 = e.psi.iter().map(|v| v * v).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "psi-weights of component {} are not normalized (sum of squares {norm})",
                    e.component_index
                )));
            }
        }
        let f = (0..=kmax)
            .map(|k| {
                DMatrix::from_fn(p, p, |i, j| {
                    let (a, b) = (&expansions[i].psi, &expansions[j].psi);
                    if k >= b.len() {
                        return 0.0;
                    }
                    a.iter().zip(&b[k..]).map(|(x, y)| x * y).sum()
                })
            })
            .collect();
        Ok(Self { lags: lags.to_vec(), beta, kmax, f })
    }

    /// Model for independent sources with Gaussian innovations, given only
    /// their autocorrelation sequences `acf[j] = (lambda_0j, ..., lambda_kmax,j)`.
    /// Autocorrelations beyond `kmax` are taken as zero.
    pub fn from_autocorrelations(acf: &[Vec<f64>], lags: &[usize]) -> Result<Self> {
        let p = acf.len();
        if p == 0 {
            return Err(Error::InvalidArgument("no components".into()));
        }
        check_lags(lags)?;
        let len = acf[0].len();
        if len == 0 || acf.iter().any(|a| a.len() != len) {
            return Err(Error::DimensionMismatch("autocorrelation sequences differ in length".into()));
        }
        let kmax = len - 1;
        if let Some(&l) = lags.iter().find(|&&l| l > kmax) {
            return Err(Error::HorizonTooSmall { required: l, given: kmax });
        }
        let f = (0..=kmax)
            .map(|k| DMatrix::from_fn(p, p, |i, j| if i == j { acf[i][k] } else { 0.0 }))
            .collect();
        Ok(Self { lags: lags.to_vec(), beta: normal_beta(p), kmax, f })
    }

    pub fn p(&self) -> usize {
        self.beta.nrows()
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    /// `F_k` for any integer `k`.
    pub fn f(&self, k: i64) -> DMatrix<f64> {
        let a = k.unsigned_abs() as usize;
        match self.f.get(a) {
            Some(m) if k >= 0 => m.clone(),
            Some(m) => m.transpose(),
            None => DMatrix::zeros(self.p(), self.p()),
        }
    }

    fn lambda_at(&self, k: i64, j: usize) -> f64 {
        self.f
            .get(k.unsigned_abs() as usize)
            .map_or(0.0, |m| m[(j, j)])
    }

    /// Diagonal of `F_k`.
    pub fn lambda(&self, k: usize) -> DVector<f64> {
        DVector::from_fn(self.p(), |j, _| self.lambda_at(k as i64, j))
    }

    /// `sum_k lambda_kj^2` over the analysis lags, per component.
    pub fn criteria(&self) -> Vec<f64> {
        (0..self.p())
            .map(|j| self.lags.iter().map(|&k| self.lambda_at(k as i64, j).powi(2)).sum())
            .collect()
    }

    /// Component order with strictly decreasing criteria, as the estimators
    /// return their rows.
    pub fn identifiable_order(&self) -> Vec<usize> {
        let c = self.criteria();
        let mut idx: Vec<usize> = (0..self.p()).collect();
        idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
        idx
    }

    /// Relabels components: new component `r` is old component `perm[r]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let p = self.p();
        let mut seen = vec![false; p];
        if perm.len() != p || perm.iter().any(|&i| i >= p || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument("not a permutation of the components".into()));
        }
        let re = |m: &DMatrix<f64>| DMatrix::from_fn(p, p, |i, j| m[(perm[i], perm[j])]);
        Ok(Self {
            lags: self.lags.clone(),
            beta: re(&self.beta),
            kmax: self.kmax,
            f: self.f.iter().map(re).collect(),
        })
    }

    /// Same sources analysed with another lag set.
    pub fn with_lags(&self, lags: &[usize]) -> Result<Self> {
        check_lags(lags)?;
        Ok(Self { lags: lags.to_vec(), ..self.clone() })
    }

    /// `c_ij(s) = sum_h lambda_hi lambda_{h+s,j}`.
    fn cross(&self, i: usize, j: usize, s: i64) -> f64 {
        let n = self.kmax as i64;
        let lo = (-n).max(-n - s);
        let hi = n.min(n - s);
        (lo..=hi)
            .map(|h| self.lambda_at(h, i) * self.lambda_at(h + s, j))
            .sum()
    }

    fn dlm_with(&self, l: usize, m: usize, cross: &mut impl FnMut(usize, usize, i64) -> f64) -> DMatrix<f64> {
        let p = self.p();
        let (li, mi) = (l as i64, m as i64);
        let (fl, fm) = (self.f(li), self.f(mi));
        DMatrix::from_fn(p, p, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            if i == j {
                (self.beta[(i, i)] - 3.0) * fl[(i, i)] * fm[(i, i)]
                    + cross(a, b, li - mi)
                    + cross(a, b, li + mi)
            } else {
                let gauss = 0.5 * (cross(a, b, li - mi) + cross(a, b, li + mi));
                let kurt = self.beta[(i, j)] - 1.0;
                if kurt == 0.0 {
                    gauss
                } else {
                    gauss + kurt * (fl[(i, j)] + fl[(j, i)]) * (fm[(i, j)] + fm[(j, i)])
                }
            }
        })
    }

    /// `D_lm`, the limiting covariance of `sqrt(T) (S_l)_ij` and
    /// `sqrt(T) (S_m)_ij` entry by entry.
    pub fn dlm(&self, l: usize, m: usize) -> Result<DMatrix<f64>> {
        if l > self.kmax || m > self.kmax {
            return Err(Error::HorizonTooSmall { required: l.max(m), given: self.kmax });
        }
        Ok(self.dlm_with(l, m, &mut |i, j, s| self.cross(i, j, s)))
    }

    /// `D_lm` for every pair in `{0} u lags`, indexed by position (0 is lag 0).
    fn dlm_table(&self) -> Vec<Vec<DMatrix<f64>>> {
        let all: Vec<usize> = std::iter::once(0).chain(self.lags.iter().copied()).collect();
        let mut cache: BTreeMap<(usize, usize, i64), f64> = BTreeMap::new();
        let mut cross = |i: usize, j: usize, s: i64| {
            // c_ij(-s) = c_ij(s) because every lambda sequence is even
            *cache.entry((i, j, s.abs())).or_insert_with(|| self.cross(i, j, s.abs()))
        };
        all.iter()
            .map(|&l| all.iter().map(|&m| self.dlm_with(l, m, &mut cross)).collect())
            .collect()
    }

    fn lambda_matrix(&self) -> DMatrix<f64> {
        // K x p, row a is lag lags[a]
        DMatrix::from_fn(self.lags.len(), self.p(), |a, j| self.lambda_at(self.lags[a] as i64, j))
    }
}

fn check_lags(lags: &[usize]) -> Result<()> {
    if lags.is_empty() {
        return Err(Error::InvalidArgument("at least one lag is required".into()));
    }
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

fn check_beta(beta: &DMatrix<f64>, p: usize) -> Result<()> {
    if beta.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!("beta must be {p}x{p}")));
    }
    if beta != &beta.transpose() {
        return Err(Error::InvalidArgument("beta must be symmetric".into()));
    }
    if (0..p).any(|i| !(beta[(i, i)] >= 1.0)) {
        return Err(Error::InvalidArgument("fourth moments beta_ii must be at least 1".into()));
    }
    Ok(())
}

/// Commutation matrix `K_pp = sum_ij (e_i e_j') (x) (e_j e_i')`.
pub fn commutation_matrix(p: usize) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        for j in 0..p {
            let mut eij = DMatrix::zeros(p, p);
            eij[(i, j)] = 1.0;
            k += eij.kronecker(&eij.transpose());
        }
    }
    k
}

/// `D_pp = sum_i (e_i e_i') (x) (e_i e_i')`.
pub fn diagonal_selector(p: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        let mut eii = DMatrix::zeros(p, p);
        eii[(i, i)] = 1.0;
        d += eii.kronecker(&eii);
    }
    d
}

/// `V_lm = diag(vec(D_lm)) (K_pp - D_pp + I_{p^2})`, the limiting covariance
/// block of `sqrt(T) vec(S_l)` and `sqrt(T) vec(S_m)`.
pub fn vlm(d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !d.is_square() {
        return Err(Error::DimensionMismatch("D_lm must be square".into()));
    }
    let p = d.nrows();
    let vec_d = DVector::from_column_slice(d.as_slice());
    let right = commutation_matrix(p) - diagonal_selector(p) + DMatrix::identity(p * p, p * p);
    Ok(DMatrix::from_diagonal(&vec_d) * right)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsvMethod {
    Deflation,
    Symmetric,
}

impl AsvMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            AsvMethod::Deflation => "deflation",
            AsvMethod::Symmetric => "symmetric",
        }
    }
}

/// Per-element limiting variances: `per_element[(j, i)]` is the variance of
/// `sqrt(T) gamma_ji` when `Omega = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsvTable {
    pub per_element: DMatrix<f64>,
    pub method: AsvMethod,
}

impl AsvTable {
    pub fn p(&self) -> usize {
        self.per_element.nrows()
    }

    /// Sum of the variances in row `j`.
    pub fn row_sum(&self, j: usize) -> f64 {
        self.per_element.row(j).sum()
    }

    /// Block-diagonal covariance of `sqrt(T) vec(Gamma_hat - I)`: the
    /// per-element variances on the diagonal. Within a row this is the exact
    /// limiting covariance; covariances across rows are not modelled.
    pub fn within_row_covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(self.per_element.as_slice()))
    }

    /// Variance sums of each row of `Gamma_hat` itself for a general mixing:
    /// `sum_r ASV(j, r) ||gamma_r||^2`. Only within-row covariances enter,
    /// so the result is exact.
    pub fn unmixing_row_sums(&self, gamma: &DMatrix<f64>) -> Result<Vec<f64>> {
        let p = self.p();
        let sigma = transform_general_mixing(&self.within_row_covariance(), gamma, CovarianceTarget::Unmixing)?;
        // vec index of element (j, c) is c * p + j
        Ok((0..p)
            .map(|j| (0..p).map(|c| sigma[(c * p + j, c * p + j)]).sum())
            .collect())
    }
}

fn diagonal_entries(model: &AsymptoticModel, d00: &DMatrix<f64>) -> DMatrix<f64> {
    let p = model.p();
    DMatrix::from_fn(p, p, |j, i| if i == j { 0.25 * d00[(j, j)] } else { 0.0 })
}

/// Limiting variances of the deflation-based estimate. Requires the
/// criteria `sum_k lambda_kj^2` to be strictly decreasing in `j`.
pub fn asv_deflation(model: &AsymptoticModel) -> Result<AsvTable> {
    let p = model.p();
    let crit = model.criteria();
    let scale = crit.iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::IdentifiabilityFailure("no autocorrelation at the chosen lags".into()));
    }
    for j in 1..p {
        if crit[j - 1] - crit[j] <= IDENTIFIABILITY_TOL * scale {
            return Err(Error::IdentifiabilityFailure(format!(
                "criteria must be strictly decreasing, got {:.6e} then {:.6e} at components {} and {}",
                crit[j - 1],
                crit[j],
                j - 1,
                j
            )));
        }
    }
    let lam = model.lambda_matrix();
    let mu = lam.transpose() * &lam;
    let d = model.dlm_table();
    let kk = model.lags.len();
    let mut out = diagonal_entries(model, &d[0][0]);
    for j in 0..p {
        for i in 0..p {
            if i == j {
                continue;
            }
            let (w, m, den) = if i < j {
                (lam.column(i), mu[(i, j)], mu[(i, j)] - mu[(i, i)])
            } else {
                (lam.column(j), mu[(j, j)], mu[(j, j)] - mu[(j, i)])
            };
            if den.abs() <= IDENTIFIABILITY_TOL * scale {
                return Err(Error::IdentifiabilityFailure(format!(
                    "zero denominator for element ({j}, {i})"
                )));
            }
            let mut num = m * m * d[0][0][(j, i)];
            for a in 0..kk {
                num -= 2.0 * m * w[a] * d[a + 1][0][(j, i)];
                for b in 0..kk {
                    num += w[a] * w[b] * d[a + 1][b + 1][(j, i)];
                }
            }
            out[(j, i)] = num / (den * den);
        }
    }
    Ok(AsvTable { per_element: out, method: AsvMethod::Deflation })
}

/// Limiting variances of the symmetric estimate. Requires every pair of
/// components to differ in their autocorrelations over the lag set.
pub fn asv_symmetric(model: &AsymptoticModel) -> Result<AsvTable> {
    let p = model.p();
    let lam = model.lambda_matrix();
    let scale = model.criteria().iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let d = model.dlm_table();
    let kk = model.lags.len();
    let mut out = diagonal_entries(model, &d[0][0]);
    for j in 0..p {
        for i in 0..p {
            if i == j {
                continue;
            }
            let diff: Vec<f64> = (0..kk).map(|a| lam[(a, j)] - lam[(a, i)]).collect();
            let sep: f64 = diff.iter().map(|v| v * v).sum();
            if sep <= IDENTIFIABILITY_TOL * scale {
                return Err(Error::PairwiseIdentifiabilityFailure(i.min(j), i.max(j)));
            }
            let nu: f64 = (0..kk).map(|a| diff[a] * lam[(a, j)]).sum();
            let mut num = nu * nu * d[0][0][(j, i)];
            for a in 0..kk {
                num -= 2.0 * nu * diff[a] * d[a + 1][0][(j, i)];
                for b in 0..kk {
                    num += diff[a] * diff[b] * d[a + 1][b + 1][(j, i)];
                }
            }
            out[(j, i)] = num / (sep * sep);
        }
    }
    Ok(AsvTable { per_element: out, method: AsvMethod::Symmetric })
}

/// Sum of the off-diagonal limiting variances; the expected value of the
/// limiting law of `T (p-1) D^2`.
pub fn global_criterion(table: &AsvTable) -> f64 {
    let p = table.p();
    let mut s = 0.0;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                s += table.per_element[(j, i)];
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceTarget {
    /// `(Gamma' (x) I) Sigma (Gamma (x) I)`, covariance of `sqrt(T) vec(Gamma_hat - Gamma)`.
    Unmixing,
    /// `(I (x) Omega) Sigma (I (x) Omega')` with `Omega = Gamma^{-1}`.
    Mixing,
}

/// Carries the `Omega = I` covariance `sigma` of `sqrt(T) vec(Gamma_hat - I)`
/// over to a general full-rank model with unmixing matrix `gamma`.
pub fn transform_general_mixing(
    sigma: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    target: CovarianceTarget,
) -> Result<DMatrix<f64>> {
    let p = gamma.nrows();
    if !gamma.is_square() || sigma.shape() != (p * p, p * p) {
        return Err(Error::DimensionMismatch(format!(
            "sigma must be {0}x{0} for a {p}x{p} gamma",
            p * p
        )));
    }
    let id = DMatrix::<f64>::identity(p, p);
    match target {
        CovarianceTarget::Unmixing => {
            inverse(gamma)?;
            let left = gamma.transpose().kronecker(&id);
            Ok(&left * sigma * left.transpose())
        }
        CovarianceTarget::Mixing => {
            let omega = inverse(gamma)?;
            let left = id.kronecker(&omega);
            Ok(&left * sigma * left.transpose())
        }
    }
}

/// Sample autocorrelations `lambda_0..lambda_kmax` of one centered series.
fn sample_acf(row: &[f64], kmax: usize) -> Vec<f64> {
    let n = row.len();
    let mean = row.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let c0 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    (0..=kmax)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let ck = x[..n - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / (n - k) as f64;
            ck / c0
        })
        .collect()
}

/// Plug-in estimate of the limiting variances for an estimate computed from
/// `x`, assuming independent MA(inf) sources with Gaussian innovations.
///
/// The estimated sources `Gamma_hat x` supply autocorrelations up to `kmax`
/// (zero beyond). Deflation estimates get [`asv_deflation`], everything else
/// [`asv_symmetric`]; AMUSE uses its single lag.
pub fn empirical_asv(
    x: &TimeSeriesMatrix,
    result: &UnmixingResult,
    lags: &[usize],
    kmax: usize,
) -> Result<AsvTable> {
    if result.p() != x.p() {
        return Err(Error::DimensionMismatch("estimate and data disagree on p".into()));
    }
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if kmax < max_lag {
        return Err(Error::HorizonTooSmall { required: max_lag, given: kmax });
    }
    if kmax + 2 > x.len() {
        return Err(Error::LagOutOfRange { lag: kmax, len: x.len() });
    }
    let z = x.transform(&result.gamma)?;
    let acf: Vec<Vec<f64>> = (0..z.p()).map(|j| sample_acf(&z.row(j), kmax)).collect();
    let model = AsymptoticModel::from_autocorrelations(&acf, lags)?;
    match result.method {
        Method::Deflation => asv_deflation(&model),
        Method::Amuse => asv_symmetric(&model.with_lags(&result.lags)?),
        _ => asv_symmetric(&model),
    }
}

/// Population autocovariance set `S_0 = Omega Omega'`, `S_k = Omega Lambda_k Omega'`
/// implied by a model and a mixing matrix.
pub fn population_autocov(model: &AsymptoticModel, omega: &DMatrix<f64>) -> Result<AutocovSet> {
    let s0 = omega * omega.transpose();
    let lagged = model
        .lags
        .iter()
        .map(|&k| omega * DMatrix::from_diagonal(&model.lambda(k)) * omega.transpose())
        .collect();
    AutocovSet::from_matrices(s0, model.lags.clone(), lagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::{expand_to_ma, SourceSpec};
    use approx::assert_abs_diff_eq;

    fn expansions(specs: &[SourceSpec]) -> Vec<MaExpansion> {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut e = expand_to_ma(s, 1e-15, 100_000).unwrap();
                e.component_index = i;
                e
            })
            .collect()
    }

    fn model(specs: &[SourceSpec], lags: &[usize]) -> AsymptoticModel {
        let e = expansions(specs);
        let k = required_horizon(&e, lags);
        AsymptoticModel::build(&e, lags, normal_beta(specs.len()), k).unwrap()
    }

    /// Direct double sum over the F matrices, independent of the
    /// cross-correlation shortcut used by `dlm`.
    fn dlm_oracle(m: &AsymptoticModel, l: i64, mm: i64) -> DMatrix<f64> {
        let p = m.p();
        let r = (m.kmax as i64) + l + mm + 1;
        let fd = |k: i64, i: usize| m.f(k)[(i, i)];
        DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                let mut s = (m.beta[(i, i)] - 3.0) * fd(l, i) * fd(mm, i);
                for k in -r..=r {
                    s += fd(k + l, i) * fd(k + mm, i) + fd(k + l, i) * fd(k - mm, i);
                }
                s
            } else {
                let mut s = 0.0;
                for k in -r..=r {
                    s += 0.5 * (fd(k + l - mm, i) * fd(k, j) + fd(k, i) * fd(k + l + mm, j));
                }
                let (fl, fm) = (m.f(l), m.f(mm));
                s + (m.beta[(i, j)] - 1.0) * (fl[(i, j)] + fl[(j, i)]) * (fm[(i, j)] + fm[(j, i)])
            }
        })
    }

    #[test]
    fn white_noise_model() {
        let m = model(&[SourceSpec::white_noise(), SourceSpec::white_noise()], &[1]);
        assert_eq!(m.f(0), DMatrix::from_element(2, 2, 1.0));
        assert_eq!(m.f(1), DMatrix::zeros(2, 2));
        let d = m.dlm(0, 0).unwrap();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn ar1_lambdas_are_powers() {
        let phi = [0.6, 0.4, 0.2];
        let m = model(&phi.map(|v| SourceSpec::ar(vec![v])), &[1, 2, 3]);
        for k in 0..6 {
            let l = m.lambda(k);
            for j in 0..3 {
                // truncation error grows like tol / phi^k
                assert_abs_diff_eq!(l[j], phi[j].powi(k as i32), epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(m.f(0).diagonal().sum(), 3.0, epsilon = 1e-12);
        assert_eq!(m.f(-2), m.f(2).transpose());
    }

    #[test]
    fn ma_lambdas_match_normalized_autocovariances() {
        let theta = vec![0.8, 3.8, 1.2, 1.4, 1.1, 0.5, 0.7, 0.3, 0.5, 1.8];
        let m = model(&[SourceSpec::ma(theta.clone())], &[1]);
        let full: Vec<f64> = std::iter::once(1.0).chain(theta).collect();
        let norm: f64 = full.iter().map(|v| v * v).sum();
        for k in 0..12 {
            let expected: f64 = if k < full.len() {
                full.iter().zip(&full[k..]).map(|(a, b)| a * b).sum::<f64>() / norm
            } else {
                0.0
            };
            assert_abs_diff_eq!(m.lambda(k)[0], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn horizon_is_validated() {
        let e = expansions(&[SourceSpec::ma(vec![0.5, 0.5])]);
        let err = AsymptoticModel::build(&e, &[4], normal_beta(1), 3).unwrap_err();
        assert_eq!(err, Error::HorizonTooSmall { required: 7, given: 3 });
    }

    #[test]
    fn dlm_matches_direct_sums() {
        let specs = [
            SourceSpec::arma(vec![0.3, 0.3, -0.4], vec![-0.6, 0.3, 1.1]),
            SourceSpec::ma(vec![1.2, 2.8, -1.0]),
            SourceSpec::ar(vec![0.0, 0.6]),
        ];
        let e = expansions(&specs);
        let lags = [1, 2, 5];
        let beta = DMatrix::from_row_slice(3, 3, &[4.0, 1.5, 0.8, 1.5, 2.0, 1.2, 0.8, 1.2, 3.0]);
        let m = AsymptoticModel::build(&e, &lags, beta, required_horizon(&e, &lags)).unwrap();
        for l in [0, 1, 2, 5] {
            for mm in [0, 1, 2, 5] {
                let d = m.dlm(l, mm).unwrap();
                let o = dlm_oracle(&m, l as i64, mm as i64);
                assert!(crate::linalg::max_abs(&(&d - &o)) < 1e-12, "l={l} m={mm}");
                let dt = m.dlm(mm, l).unwrap();
                assert!(crate::linalg::max_abs(&(&d - &dt)) < 1e-12);
            }
        }
    }

    #[test]
    fn vlm_small_cases() {
        let v = vlm(&DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(v, DMatrix::from_element(1, 1, 2.0));
        let v = vlm(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(v[(0, 0)], 2.0);
        assert_eq!(v[(1, 2)], 1.0);
        assert_eq!(v[(1, 1)], 1.0);
        assert_eq!(v[(3, 3)], 2.0);
        assert_eq!(v[(0, 3)], 0.0);
    }

    #[test]
    fn white_noise_is_not_identifiable() {
        let m = model(&[SourceSpec::white_noise(), SourceSpec::white_noise()], &[1, 2]);
        let err = asv_deflation(&m).unwrap_err();
        assert!(err.to_string().starts_with("identifiability failure"));
        assert!(matches!(asv_symmetric(&m), Err(Error::PairwiseIdentifiabilityFailure(0, 1))));
    }

    #[test]
    fn identical_components_rejected() {
        let m = model(&[SourceSpec::ar(vec![0.5]), SourceSpec::ar(vec![0.5])], &[1, 2]);
        assert!(asv_symmetric(&m).unwrap_err().to_string().starts_with("pairwise identifiability failure"));
        assert!(asv_deflation(&m).is_err());
    }

    #[test]
    fn wrong_order_rejected_by_deflation() {
        let m = model(&[SourceSpec::ar(vec![0.2]), SourceSpec::ar(vec![0.6])], &[1]);
        assert!(matches!(asv_deflation(&m), Err(Error::IdentifiabilityFailure(_))));
        let ordered = m.permuted(&m.identifiable_order()).unwrap();
        assert!(asv_deflation(&ordered).is_ok());
    }

    #[test]
    fn single_component_tables() {
        let m = model(&[SourceSpec::ar(vec![0.5])], &[1]);
        let d00 = m.dlm(0, 0).unwrap()[(0, 0)];
        let t = asv_symmetric(&m).unwrap();
        assert_eq!(t.per_element, DMatrix::from_element(1, 1, 0.25 * d00));
        assert_eq!(global_criterion(&t), 0.0);
        // AR(1): c(0) = (1 + phi^2)/(1 - phi^2) and D_00 = 2 c(0)
        assert_abs_diff_eq!(d00, 2.0 * 1.25 / 0.75, epsilon = 1e-12);
    }

    #[test]
    fn ar1_pair_closed_form() {
        // Two AR(1) sources, one lag: lambda_j = phi_j, c_12(s) = sum_h a^|h| b^|h+s|.
        let (a, b) = (0.6_f64, 0.4_f64);
        let m = model(&[SourceSpec::ar(vec![a]), SourceSpec::ar(vec![b])], &[1]);
        let c = |s: i64| -> f64 { (-400..=400).map(|h: i64| a.powi(h.abs() as i32) * b.powi((h + s).abs() as i32)).sum() };
        let d = |l: i64, mm: i64| 0.5 * (c(l - mm) + c(l + mm));
        // single lag: gamma_21 = (S_1 - b S_0)_21 / (b - a)
        let expected = (d(1, 1) - 2.0 * b * d(1, 0) + b * b * d(0, 0)) / ((b - a) * (b - a));
        let t = asv_symmetric(&m).unwrap();
        assert_abs_diff_eq!(t.per_element[(1, 0)], expected, epsilon = 1e-8);
        let td = asv_deflation(&m).unwrap();
        assert_abs_diff_eq!(td.per_element[(1, 0)], expected, epsilon = 1e-8);
    }

    #[test]
    fn criterion_arithmetic() {
        let t = AsvTable { per_element: DMatrix::from_element(3, 3, 0.7), method: AsvMethod::Symmetric };
        assert_abs_diff_eq!(global_criterion(&t), 6.0 * 0.7, epsilon = 1e-15);
    }

    #[test]
    fn sign_flip_invariance() {
        let lags = [1, 2, 3];
        let mut e = expansions(&[SourceSpec::ar(vec![0.7]), SourceSpec::ma(vec![0.5, -0.9]), SourceSpec::ar(vec![0.0, 0.3])]);
        let k = required_horizon(&e, &lags);
        let base = asv_symmetric(&AsymptoticModel::build(&e, &lags, normal_beta(3), k).unwrap()).unwrap();
        e[1].psi.iter_mut().for_each(|v| *v = -*v);
        let flipped = asv_symmetric(&AsymptoticModel::build(&e, &lags, normal_beta(3), k).unwrap()).unwrap();
        assert!(crate::linalg::max_abs(&(base.per_element - flipped.per_element)) < 1e-12);
    }

    #[test]
    fn transform_cases() {
        let sigma = DMatrix::from_fn(4, 4, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let id = DMatrix::identity(2, 2);
        assert_eq!(transform_general_mixing(&sigma, &id, CovarianceTarget::Unmixing).unwrap(), sigma);
        let two = &id * 2.0;
        let t = transform_general_mixing(&sigma, &two, CovarianceTarget::Unmixing).unwrap();
        assert!(crate::linalg::max_abs(&(t - &sigma * 4.0)) < 1e-15);
        let t = transform_general_mixing(&sigma, &two, CovarianceTarget::Mixing).unwrap();
        assert!(crate::linalg::max_abs(&(t - &sigma * 0.25)) < 1e-15);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(transform_general_mixing(&sigma, &singular, CovarianceTarget::Unmixing).is_err());
    }

    #[test]
    fn transform_matches_elementwise_kronecker() {
        let g = DMatrix::from_row_slice(2, 2, &[1.3, -0.4, 0.7, 2.1]);
        let sigma = DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let p = 2;
        // (G' (x) I)_{(a,b),(c,d)} = G'_{ac} I_{bd} with vec index = block * p + inner
        let kron = |a: usize, b: usize| -> f64 {
            let (ai, bi) = (a / p, a % p);
            let (aj, bj) = (b / p, b % p);
            g[(aj, ai)] * if bi == bj { 1.0 } else { 0.0 }
        };
        let mut expected = DMatrix::zeros(4, 4);
        for r in 0..4 {
            for c in 0..4 {
                let mut s = 0.0;
                for x in 0..4 {
                    for y in 0..4 {
                        s += kron(r, x) * sigma[(x, y)] * kron(c, y);
                    }
                }
                expected[(r, c)] = s;
            }
        }
        let t = transform_general_mixing(&sigma, &g, CovarianceTarget::Unmixing).unwrap();
        assert!(crate::linalg::max_abs(&(t - expected)) < 1e-12);
    }

    #[test]
    fn row_sums_for_general_gamma() {
        let t = AsvTable {
            per_element: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            method: AsvMethod::Symmetric,
        };
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
        // ||gamma_1||^2 = 4, ||gamma_2||^2 = 2
        assert_eq!(t.unmixing_row_sums(&g).unwrap(), vec![1.0 * 4.0 + 2.0 * 2.0, 3.0 * 4.0 + 4.0 * 2.0]);
        assert_eq!(t.row_sum(1), 7.0);
    }
}
