//! The workflows behind each subcommand, as plain functions over in-memory
//! data. `run` in the crate root handles files and formatting.

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sobi::asymptotics::{
    asv_deflation, asv_symmetric, empirical_asv, global_criterion, normal_beta, required_horizon,
    AsvTable, AsymptoticModel,
};
use sobi::autocovariance::{autocov_set, AutocovSet};
use sobi::joint_diag::{
    amuse, sobi_deflation, sobi_symmetric_fixedpoint, sobi_symmetric_jacobi, Method, UnmixingResult,
    DEFAULT_FIXED_POINT_TOL, DEFAULT_JACOBI_TOL, DEFAULT_MAX_ITER, DEFAULT_MAX_SWEEPS, DEFAULT_RESTARTS,
};
use sobi::metrics::{amari, max_weight_assignment, mdi};
use sobi::signal_model::{
    expand_to_ma, mix, simulate_sources, simulate_sources_with, Gaussian, MaExpansion, MixingModel,
    TimeSeriesMatrix, DEFAULT_MAX_LEN, DEFAULT_TRUNCATION_TOL,
};

use crate::model::ModelFile;

/// Simulated sources, or their mixture when `mixed` is set.
pub fn simulate(model: &ModelFile, len: usize, seed: u64, burn_in: usize, mixed: bool) -> Result<TimeSeriesMatrix> {
    let z = simulate_sources(&model.components, len, seed, burn_in)?;
    if mixed {
        Ok(mix(&z, &model.mixing()?)?)
    } else {
        Ok(z)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub method: Method,
    /// AMUSE lag; defaults to the smallest analysis lag.
    pub tau: Option<usize>,
    /// Iteration cap, or sweep cap for Jacobi.
    pub max_iter: Option<usize>,
    pub seed: u64,
}

impl EstimatorOptions {
    pub fn new(method: Method) -> Self {
        Self { method, tau: None, max_iter: None, seed: 0 }
    }
}

/// Autocovariances and the estimate for one dataset.
pub fn estimate(
    x: &TimeSeriesMatrix,
    lags: &[usize],
    centered: bool,
    opts: &EstimatorOptions,
) -> Result<(UnmixingResult, AutocovSet)> {
    ensure!(!lags.is_empty(), "at least one lag is required");
    if opts.method == Method::Amuse {
        let tau = opts.tau.unwrap_or_else(|| *lags.iter().min().unwrap());
        let set = autocov_set(x, &[tau], centered)?;
        return Ok((amuse(&set, tau)?, set));
    }
    let set = autocov_set(x, lags, centered)?;
    let result = estimate_from_set(&set, opts)?;
    Ok((result, set))
}

pub fn estimate_from_set(set: &AutocovSet, opts: &EstimatorOptions) -> Result<UnmixingResult> {
    Ok(match opts.method {
        Method::Amuse => {
            let tau = opts.tau.unwrap_or_else(|| *set.lags().iter().min().unwrap());
            amuse(set, tau)?
        }
        Method::Deflation => sobi_deflation(
            set,
            DEFAULT_FIXED_POINT_TOL,
            opts.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            DEFAULT_RESTARTS,
            opts.seed,
        )?,
        Method::SymmetricFixedpoint => sobi_symmetric_fixedpoint(
            set,
            DEFAULT_FIXED_POINT_TOL,
            opts.max_iter.unwrap_or(DEFAULT_MAX_ITER),
        )?,
        Method::SymmetricJacobi => {
            sobi_symmetric_jacobi(set, DEFAULT_JACOBI_TOL, opts.max_iter.unwrap_or(DEFAULT_MAX_SWEEPS))?
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparateReport {
    pub method: Method,
    pub lags: Vec<usize>,
    pub gamma: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub objective: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mdi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amari: Option<f64>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn centered(x: &TimeSeriesMatrix) -> Result<TimeSeriesMatrix> {
    let mut v = x.values().clone();
    for mut row in v.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    Ok(TimeSeriesMatrix::new(v)?)
}

/// Estimates the unmixing matrix and the sources. With a known mixing matrix
/// the report also carries both performance indices of `Gamma_hat Omega`.
pub fn separate(
    x: &TimeSeriesMatrix,
    lags: &[usize],
    center: bool,
    opts: &EstimatorOptions,
    omega: Option<&DMatrix<f64>>,
) -> Result<(SeparateReport, TimeSeriesMatrix)> {
    let (result, _) = estimate(x, lags, center, opts)?;
    let (mdi_value, amari_value) = match omega {
        Some(o) => {
            ensure!(o.shape() == (x.p(), x.p()), "omega must be {0}x{0}", x.p());
            let g = &result.gamma * o;
            (Some(mdi(&g)?), Some(amari(&g)?))
        }
        None => (None, None),
    };
    let sources = if center { centered(x)? } else { x.clone() }.transform(&result.gamma)?;
    let report = SeparateReport {
        method: result.method,
        lags: result.lags.clone(),
        gamma: rows_of(&result.gamma),
        iterations: result.iterations,
        converged: result.converged,
        residual: result.residual,
        objective: result.objective,
        warnings: result.warnings.iter().map(|w| format!("{w:?}")).collect(),
        mdi: mdi_value,
        amari: amari_value,
    };
    Ok((report, sources))
}

fn expansions(model: &ModelFile) -> Result<Vec<MaExpansion>> {
    model
        .components
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut e = expand_to_ma(spec, DEFAULT_TRUNCATION_TOL, DEFAULT_MAX_LEN)
                .with_context(|| format!("component {i}"))?;
            e.component_index = i;
            Ok(e)
        })
        .collect()
}

/// Exact asymptotic model for the components of `model`.
pub fn asymptotic_model(model: &ModelFile, lags: &[usize], fourth_moments: Option<&[f64]>) -> Result<AsymptoticModel> {
    let e = expansions(model)?;
    let beta = match fourth_moments {
        Some(b) => {
            ensure!(b.len() == model.p(), "need {} fourth moments, got {}", model.p(), b.len());
            sobi::asymptotics::independent_beta(b)
        }
        None => normal_beta(model.p()),
    };
    let kmax = required_horizon(&e, lags);
    Ok(AsymptoticModel::build(&e, lags, beta, kmax)?)
}

/// Limiting variance tables of both SOBI estimates, indexed by the
/// components as listed in the model.
#[derive(Debug, Clone)]
pub struct AsvSummary {
    /// `order[r]` is the component the estimates return as row `r`.
    pub order: Vec<usize>,
    pub deflation: AsvTable,
    pub symmetric: AsvTable,
}

impl AsvSummary {
    pub fn global(&self) -> (f64, f64) {
        (global_criterion(&self.deflation), global_criterion(&self.symmetric))
    }
}

fn to_component_order(table: AsvTable, order: &[usize]) -> AsvTable {
    let p = order.len();
    let mut out = DMatrix::zeros(p, p);
    for r in 0..p {
        for c in 0..p {
            out[(order[r], order[c])] = table.per_element[(r, c)];
        }
    }
    AsvTable { per_element: out, method: table.method }
}

/// Both tables for a model. The components are first arranged in the order
/// the estimates return them (criterion decreasing), which the deflation
/// formulas require.
pub fn asymptotic_tables(model: &ModelFile, lags: &[usize], fourth_moments: Option<&[f64]>) -> Result<AsvSummary> {
    let m = asymptotic_model(model, lags, fourth_moments)?;
    let order = m.identifiable_order();
    let ordered = m.permuted(&order)?;
    let deflation = asv_deflation(&ordered).context("deflation-based estimate")?;
    let symmetric = asv_symmetric(&ordered).context("symmetric estimate")?;
    Ok(AsvSummary {
        deflation: to_component_order(deflation, &order),
        symmetric: to_component_order(symmetric, &order),
        order,
    })
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub model: ModelFile,
    pub lags: Vec<usize>,
    pub methods: Vec<Method>,
    pub t_values: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub tau: Option<usize>,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub t: usize,
    pub method: Method,
    /// Replications that produced an estimate.
    pub reps: usize,
    pub mean: f64,
    pub se: f64,
    /// Expected value of the limiting law of `T (p-1) D^2`.
    pub asymptotic: Option<f64>,
}

/// RNG for replication `rep` at length `t`: one ChaCha stream per
/// replication under a key derived from the seed and the length.
pub fn replication_rng(seed: u64, t: usize, rep: usize) -> ChaCha8Rng {
    let key = seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(rep as u64);
    rng
}

fn asymptotic_value(model: &ModelFile, lags: &[usize], method: Method, tau: Option<usize>) -> Option<f64> {
    match method {
        Method::Amuse => {
            let tau = tau.unwrap_or_else(|| *lags.iter().min().unwrap());
            let m = asymptotic_model(model, &[tau], None).ok()?;
            asv_symmetric(&m).ok().map(|t| global_criterion(&t))
        }
        Method::Deflation => asymptotic_tables(model, lags, None).ok().map(|s| s.global().0),
        _ => {
            let m = asymptotic_model(model, lags, None).ok()?;
            asv_symmetric(&m).ok().map(|t| global_criterion(&t))
        }
    }
}

/// `T (p-1) D^2` for every method on one simulated dataset; `None` where the
/// estimate failed.
pub fn replication(cfg: &BenchmarkConfig, mixing: &MixingModel, t: usize, rep: usize) -> Result<Vec<Option<f64>>> {
    let mut rng = replication_rng(cfg.seed, t, rep);
    let z = simulate_sources_with(&cfg.model.components, t, &mut rng, cfg.burn_in, &Gaussian)?;
    let x = mix(&z, mixing)?;
    let p = x.p() as f64;
    let set = autocov_set(&x, &cfg.lags, cfg.centered)?;
    Ok(cfg
        .methods
        .iter()
        .map(|&method| {
            let opts = EstimatorOptions { method, tau: cfg.tau, max_iter: None, seed: rep as u64 };
            let result = if method == Method::Amuse {
                estimate(&x, &cfg.lags, cfg.centered, &opts).map(|(r, _)| r)
            } else {
                estimate_from_set(&set, &opts)
            };
            let g = &result.ok()?.gamma * &mixing.omega;
            let d = mdi(&g).ok()?;
            Some(t as f64 * (p - 1.0) * d * d)
        })
        .collect())
}

/// Monte Carlo averages of `T (p-1) D^2`. Replications run in parallel on
/// the current rayon pool and are combined in replication order.
pub fn benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    ensure!(cfg.reps >= 1, "reps must be at least 1");
    ensure!(!cfg.methods.is_empty(), "no methods selected");
    ensure!(!cfg.t_values.is_empty(), "no series lengths given");
    let mixing = cfg.model.mixing()?;
    let mut rows = Vec::new();
    for &t in &cfg.t_values {
        let values: Vec<Vec<Option<f64>>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| replication(cfg, &mixing, t, rep))
            .collect::<Result<_>>()?;
        for (m, &method) in cfg.methods.iter().enumerate() {
            let ok: Vec<f64> = values.iter().filter_map(|v| v[m]).collect();
            let n = ok.len();
            let mean = ok.iter().sum::<f64>() / n as f64;
            let se = if n > 1 {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                f64::NAN
            };
            rows.push(BenchmarkRow {
                t,
                method,
                reps: n,
                mean,
                se,
                asymptotic: asymptotic_value(&cfg.model, &cfg.lags, method, cfg.tau),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCandidate {
    pub name: String,
    pub lags: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagSelectRow {
    pub name: String,
    pub lags: Vec<usize>,
    /// Variance sums of the selected rows of `Gamma_hat`, in the row order of
    /// the first candidate's estimate.
    pub row_sums: Vec<f64>,
    pub total: f64,
    pub rank: usize,
}

/// Compares lag sets by the estimated variances of selected rows of the
/// symmetric estimate. Rows of every candidate's estimate are matched to
/// those of the first candidate by the correlations of the estimated
/// sources. `rows` are 0-based; all rows when `None`. Each candidate uses
/// autocorrelations up to `kmax_factor` times its largest lag, capped by the
/// series length.
pub fn lagselect(
    x: &TimeSeriesMatrix,
    candidates: &[LagCandidate],
    rows: Option<&[usize]>,
    center: bool,
    kmax_factor: usize,
) -> Result<Vec<LagSelectRow>> {
    ensure!(candidates.len() >= 2, "at least two candidate lag sets are needed");
    let p = x.p();
    let selected: Vec<usize> = rows.map_or_else(|| (0..p).collect(), <[usize]>::to_vec);
    if let Some(&r) = selected.iter().find(|&&r| r >= p) {
        bail!("row {} out of range for {p} series", r + 1);
    }
    let opts = EstimatorOptions::new(Method::SymmetricFixedpoint);
    let mut reference: Option<DMatrix<f64>> = None;
    let mut out = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let (result, set) = estimate(x, &cand.lags, center, &opts).with_context(|| format!("lag set {}", cand.name))?;
        let max_lag = *cand.lags.iter().max().unwrap();
        let kmax = (kmax_factor.max(1) * max_lag).min(x.len().saturating_sub(2));
        let table = empirical_asv(x, &result, &cand.lags, kmax).with_context(|| format!("lag set {}", cand.name))?;
        let sums = table.unmixing_row_sums(&result.gamma)?;
        let matched = match &reference {
            None => {
                reference = Some(result.gamma.clone());
                (0..p).collect()
            }
            Some(g_ref) => {
                let cross = g_ref * &set.s0 * result.gamma.transpose();
                max_weight_assignment(&cross.map(|v| v * v))
            }
        };
        let row_sums: Vec<f64> = selected.iter().map(|&r| sums[matched[r]]).collect();
        out.push(LagSelectRow {
            name: cand.name.clone(),
            lags: cand.lags.clone(),
            total: row_sums.iter().sum(),
            row_sums,
            rank: 0,
        });
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[a].total.total_cmp(&out[b].total));
    for (rank, &i) in order.iter().enumerate() {
        out[i].rank = rank + 1;
    }
    Ok(out)
}
