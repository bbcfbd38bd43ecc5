//! Latent source processes and mixing.
//!
//! Every source is a causal linear process `z_t = sum_j psi_j eps_{t-j}` with
//! iid innovations. ARMA specs are expanded to their psi-weights, truncated
//! where the remaining tail mass drops below a tolerance, and normalized to
//! unit variance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_LEN: usize = 100_000;
pub const DEFAULT_BURN_IN: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Ma,
    Ar,
    Arma,
    Psi,
}

/// One latent component.
///
/// MA coefficients follow the `(1, theta_1, ..., theta_q)` convention: the
/// leading unit coefficient is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default)]
    pub ar: Vec<f64>,
    #[serde(default)]
    pub ma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
}

impl SourceSpec {
    pub fn white_noise() -> Self {
        Self::ma(vec![])
    }

    pub fn ma(theta: Vec<f64>) -> Self {
        Self { kind: SourceKind::Ma, ar: vec![], ma: theta, psi: None }
    }

    pub fn ar(phi: Vec<f64>) -> Self {
        Self { kind: SourceKind::Ar, ar: phi, ma: vec![], psi: None }
    }

    pub fn arma(phi: Vec<f64>, theta: Vec<f64>) -> Self {
        Self { kind: SourceKind::Arma, ar: phi, ma: theta, psi: None }
    }

    pub fn explicit_psi(psi: Vec<f64>) -> Self {
        Self { kind: SourceKind::Psi, ar: vec![], ma: vec![], psi: Some(psi) }
    }

    fn ar_part(&self) -> &[f64] {
        match self.kind {
            SourceKind::Ar | SourceKind::Arma => &self.ar,
            _ => &[],
        }
    }

    fn ma_part(&self) -> &[f64] {
        match self.kind {
            SourceKind::Ma | SourceKind::Arma => &self.ma,
            _ => &[],
        }
    }

    /// Checks finiteness, explicit-psi content and AR causality.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.ar) || !finite(&self.ma) {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        match self.kind {
            SourceKind::Psi => {
                let psi = self
                    .psi
                    .as_deref()
                    .ok_or_else(|| Error::InvalidSpec("kind psi requires a psi sequence".into()))?;
                if !finite(psi) {
                    return Err(Error::InvalidSpec("non-finite psi weight".into()));
                }
                if psi.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidSpec("psi weights are all zero".into()));
                }
            }
            SourceKind::Ma if !self.ar.is_empty() => {
                return Err(Error::InvalidSpec("kind ma takes no ar coefficients".into()));
            }
            SourceKind::Ar if !self.ma.is_empty() => {
                return Err(Error::InvalidSpec("kind ar takes no ma coefficients".into()));
            }
            _ => {}
        }
        let rho = ar_spectral_radius(self.ar_part());
        // roots within rounding of the unit circle count as unit roots
        if rho >= 1.0 - 1e-10 {
            return Err(Error::NotCausal(rho));
        }
        Ok(())
    }
}

/// Largest modulus among the inverse roots of `1 - phi_1 z - ... - phi_p z^p`,
/// i.e. the spectral radius of the companion matrix. Causal iff below one.
pub fn ar_spectral_radius(phi: &[f64]) -> f64 {
    let phi = trim_trailing_zeros(phi);
    if phi.is_empty() {
        return 0.0;
    }
    companion(phi)
        .complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn trim_trailing_zeros(v: &[f64]) -> &[f64] {
    let n = v.iter().rposition(|&x| x != 0.0).map_or(0, |i| i + 1);
    &v[..n]
}

fn companion(phi: &[f64]) -> DMatrix<f64> {
    let n = phi.len();
    DMatrix::from_fn(n, n, |r, c| {
        if r == 0 {
            phi[c]
        } else if c + 1 == r {
            1.0
        } else {
            0.0
        }
    })
}

/// Truncated, unit-variance psi-weights of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct MaExpansion {
    /// `psi_0, ..., psi_N` with `sum psi_j^2 = 1`.
    pub psi: Vec<f64>,
    pub truncation_tol: f64,
    pub component_index: usize,
    /// Factor that turns the raw recursion output into unit variance.
    pub scale: f64,
}

impl MaExpansion {
    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Population autocovariance `sum_t psi_t psi_{t+k}`.
    pub fn autocovariance(&self, k: usize) -> f64 {
        if k >= self.psi.len() {
            return 0.0;
        }
        self.psi.iter().zip(&self.psi[k..]).map(|(a, b)| a * b).sum()
    }
}

/// Expands a source spec into normalized psi-weights.
///
/// The weights follow `psi_j = theta_j + sum_i phi_i psi_{j-i}` with
/// `theta_0 = 1`. Once the MA part is exhausted the recursion is a linear
/// system `s_{j+1} = A s_j` in the companion state, so the exact remaining
/// tail mass is `s_N' G s_N` with `G = sum_{n>=1} (A^n)' e_1 e_1' A^n`.
pub fn expand_to_ma(spec: &SourceSpec, tol: f64, max_len: usize) -> Result<MaExpansion> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be at least 1".into()));
    }
    spec.validate()?;

    let raw = if let SourceKind::Psi = spec.kind {
        let psi = spec.psi.as_deref().unwrap_or_default();
        let psi = trim_trailing_zeros(psi);
        if psi.len() > max_len {
            return Err(Error::TruncationOverflow(max_len));
        }
        psi.to_vec()
    } else {
        arma_psi(spec.ar_part(), spec.ma_part(), tol, max_len)?
    };

    let norm2: f64 = raw.iter().map(|v| v * v).sum();
    let scale = 1.0 / norm2.sqrt();
    Ok(MaExpansion {
        psi: raw.iter().map(|v| v / norm2.sqrt()).collect(),
        truncation_tol: tol,
        component_index: 0,
        scale,
    })
}

fn arma_psi(phi: &[f64], theta: &[f64], tol: f64, max_len: usize) -> Result<Vec<f64>> {
    let phi = trim_trailing_zeros(phi);
    let theta = trim_trailing_zeros(theta);
    let q = theta.len();
    let next = |psi: &[f64]| {
        let j = psi.len();
        let mut v = if j == 0 { 1.0 } else if j <= q { theta[j - 1] } else { 0.0 };
        for (i, &f) in phi.iter().enumerate() {
            if j > i {
                v += f * psi[j - 1 - i];
            }
        }
        v
    };

    let mut psi = Vec::with_capacity(q + 1);
    while psi.len() <= q {
        if psi.len() == max_len {
            return Err(Error::TruncationOverflow(max_len));
        }
        let v = next(&psi);
        psi.push(v);
    }
    if phi.is_empty() {
        return Ok(trim_trailing_zeros(&psi).to_vec());
    }

    let gram = tail_gram(phi)?;
    let p = phi.len();
    let tail = |psi: &[f64]| {
        let n = psi.len();
        let s = DVector::from_fn(p, |i, _| if n > i { psi[n - 1 - i] } else { 0.0 });
        s.dot(&(&gram * &s)).max(0.0)
    };
    loop {
        let head: f64 = psi.iter().map(|v| v * v).sum();
        let rest = tail(&psi);
        if rest < tol * (head + rest) {
            return Ok(psi);
        }
        if psi.len() >= max_len {
            return Err(Error::TruncationOverflow(max_len));
        }
        let v = next(&psi);
        psi.push(v);
    }
}

/// Solves `G = A' e1 e1' A + A' G A` for the companion matrix `A`.
fn tail_gram(phi: &[f64]) -> Result<DMatrix<f64>> {
    let a = companion(phi);
    let n = a.nrows();
    let at = a.transpose();
    let c = DMatrix::from_fn(n, n, |r, s| a[(0, r)] * a[(0, s)]);
    let lhs = DMatrix::identity(n * n, n * n) - at.kronecker(&at);
    let rhs = DVector::from_column_slice(c.as_slice());
    let g = lhs.lu().solve(&rhs).ok_or(Error::SingularMatrix)?;
    let g = DMatrix::from_column_slice(n, n, g.as_slice());
    Ok(crate::linalg::symmetrize(&g))
}

/// Innovation law for simulation. Draws must have mean zero and unit variance.
pub trait InnovationLaw: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64;
    /// `E(eps^4)`, the `beta_ii` parameter of the asymptotic formulas.
    fn fourth_moment(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl InnovationLaw for Gaussian {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn fourth_moment(&self) -> f64 {
        3.0
    }
}

/// Uniform on `[-sqrt 3, sqrt 3]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformInnovation;

impl InnovationLaw for UniformInnovation {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let r = 3f64.sqrt();
        rng.random_range(-r..r)
    }

    fn fourth_moment(&self) -> f64 {
        1.8
    }
}

/// Laplace with unit variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct LaplaceInnovation;

impl InnovationLaw for LaplaceInnovation {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let mut u: f64 = rng.random_range(-0.5..0.5);
        while u.abs() >= 0.5 {
            u = rng.random_range(-0.5..0.5);
        }
        let b = 1.0 / 2f64.sqrt();
        -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    fn fourth_moment(&self) -> f64 {
        6.0
    }
}

/// `p x T` matrix of series; column `t` is the observation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    values: DMatrix<f64>,
}

impl TimeSeriesMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 1 {
            return Err(Error::DimensionMismatch("need at least one series".into()));
        }
        if values.ncols() < 2 {
            return Err(Error::DimensionMismatch("need at least two time points".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("series contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    /// Builds from one `Vec` per component.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::DimensionMismatch("rows have different lengths".into()));
        }
        Self::new(DMatrix::from_fn(p, t, |i, j| rows[i][j]))
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Applies `m` to every observation: `m x_t`.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to {}-variate series",
                m.nrows(),
                m.ncols(),
                self.p()
            )));
        }
        Self::new(m * &self.values)
    }
}

/// `x_t = mu + omega z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel {
    pub omega: DMatrix<f64>,
    pub mu: DVector<f64>,
}

impl MixingModel {
    pub fn new(omega: DMatrix<f64>, mu: Option<DVector<f64>>) -> Result<Self> {
        if !omega.is_square() {
            return Err(Error::DimensionMismatch("mixing matrix must be square".into()));
        }
        let p = omega.nrows();
        let mu = mu.unwrap_or_else(|| DVector::zeros(p));
        if mu.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "location has length {}, mixing matrix is {p}x{p}",
                mu.len()
            )));
        }
        let sv = omega.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || !(smax / smin).is_finite() || smax / smin > 1e14 {
            return Err(Error::RankDeficient("mixing matrix is singular".into()));
        }
        Ok(Self { omega, mu })
    }

    pub fn identity(p: usize) -> Self {
        Self { omega: DMatrix::identity(p, p), mu: DVector::zeros(p) }
    }
}

pub fn mix(z: &TimeSeriesMatrix, model: &MixingModel) -> Result<TimeSeriesMatrix> {
    if model.omega.ncols() != z.p() {
        return Err(Error::DimensionMismatch(format!(
            "mixing matrix is {}x{}, sources are {}-variate",
            model.omega.nrows(),
            model.omega.ncols(),
            z.p()
        )));
    }
    let mut x = &model.omega * z.values();
    for mut col in x.column_iter_mut() {
        col += &model.mu;
    }
    TimeSeriesMatrix::new(x)
}

/// Simulates independent components with Gaussian innovations.
pub fn simulate_sources(
    specs: &[SourceSpec],
    len: usize,
    seed: u64,
    burn_in: usize,
) -> Result<TimeSeriesMatrix> {
    simulate_sources_with(specs, len, &mut ChaCha8Rng::seed_from_u64(seed), burn_in, &Gaussian)
}

/// Simulates independent components from a caller-owned RNG stream.
///
/// AR and ARMA components run their recursion from zero for `burn_in` extra
/// steps. MA and explicit-psi components are finite convolutions and only
/// need `N` pre-samples.
pub fn simulate_sources_with<L: InnovationLaw + ?Sized>(
    specs: &[SourceSpec],
    len: usize,
    rng: &mut ChaCha8Rng,
    burn_in: usize,
    law: &L,
) -> Result<TimeSeriesMatrix> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no source specs".into()));
    }
    if len < 2 {
        return Err(Error::InvalidArgument(format!("series length must be >= 2, got {len}")));
    }
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let exp = expand_to_ma(spec, DEFAULT_TRUNCATION_TOL, DEFAULT_MAX_LEN)?;
        let row = match spec.kind {
            SourceKind::Ar | SourceKind::Arma => {
                let phi = trim_trailing_zeros(&spec.ar);
                let theta = trim_trailing_zeros(spec.ma_part());
                let total = len + burn_in;
                let eps: Vec<f64> = (0..total).map(|_| law.sample(rng)).collect();
                let mut z = vec![0.0; total];
                for t in 0..total {
                    let mut v = eps[t];
                    for (j, &th) in theta.iter().enumerate() {
                        if t > j {
                            v += th * eps[t - 1 - j];
                        }
                    }
                    for (i, &f) in phi.iter().enumerate() {
                        if t > i {
                            v += f * z[t - 1 - i];
                        }
                    }
                    z[t] = v;
                }
                z[burn_in..].iter().map(|v| v * exp.scale).collect::<Vec<_>>()
            }
            SourceKind::Ma | SourceKind::Psi => {
                let n = exp.psi.len();
                let eps: Vec<f64> = (0..len + n - 1).map(|_| law.sample(rng)).collect();
                (0..len)
                    .map(|t| {
                        // eps index t + n - 1 is time t
                        exp.psi
                            .iter()
                            .enumerate()
                            .map(|(j, w)| w * eps[t + n - 1 - j])
                            .sum()
                    })
                    .collect()
            }
        };
        rows.push(row);
    }
    TimeSeriesMatrix::from_rows(&rows)
}
