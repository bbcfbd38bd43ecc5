//! Command-line driver for the `sobi` crate: simulation, separation,
//! asymptotic variance tables, Monte Carlo benchmarks and lag-set selection.

pub mod commands;
pub mod io;
pub mod lagspec;
pub mod model;

use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sobi::joint_diag::Method;
use sobi::signal_model::DEFAULT_BURN_IN;

use commands::{BenchmarkConfig, EstimatorOptions, LagCandidate};
use io::format_value;
use lagspec::{format_lags, parse_lags};
use model::ModelFile;

#[derive(Debug, Parser)]
#[command(name = "sobi", version, about = "Second-order blind source separation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sources (or their mixture) from a model
    Simulate(SimulateArgs),
    /// Estimate the unmixing matrix of a data file
    Separate(SeparateArgs),
    /// Limiting variances of both SOBI estimates for a model
    Asv(AsvArgs),
    /// Monte Carlo averages of T(p-1)D^2 over series lengths
    Benchmark(BenchmarkArgs),
    /// Rank candidate lag sets by estimated unmixing variances
    Lagselect(LagselectArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// JSON model file
    #[arg(long, conflicts_with = "preset")]
    pub model: Option<PathBuf>,
    /// Built-in model: a, b, c or d
    #[arg(long)]
    pub preset: Option<String>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelFile> {
        ModelFile::resolve(self.model.as_deref(), self.preset.as_deref())
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Series length
    #[arg(long, short = 'T')]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    /// Write the mixture x = mu + Omega z instead of the sources
    #[arg(long)]
    pub mix: bool,
    /// Write a header row
    #[arg(long)]
    pub header: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// CSV data, one row per time point
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "symmetric-fixedpoint")]
    pub method: Method,
    /// Lag set, e.g. 1-10 or 1-10,12-20:2
    #[arg(long, default_value = "1-10")]
    pub lags: String,
    /// AMUSE lag (defaults to the smallest lag)
    #[arg(long)]
    pub tau: Option<usize>,
    /// True mixing matrix as CSV; adds MDI and Amari index to the report
    #[arg(long)]
    pub omega: Option<PathBuf>,
    /// Treat the data as already centered
    #[arg(long)]
    pub no_center: bool,
    /// Iteration cap (sweep cap for Jacobi)
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed for the random restarts of the deflation-based estimate
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimated sources as CSV
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// JSON report (stdout when omitted)
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct AsvArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "1-10")]
    pub lags: String,
    /// Innovation fourth moments E(e^4), one per component (default 3)
    #[arg(long, value_delimiter = ',')]
    pub fourth_moments: Option<Vec<f64>>,
    /// Per-element table as CSV (stdout when omitted)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Global criteria as CSV (stderr when omitted)
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "1-10")]
    pub lags: String,
    #[arg(long, value_delimiter = ',', default_value = "symmetric-fixedpoint,deflation")]
    pub methods: Vec<Method>,
    #[arg(long = "t-values", value_delimiter = ',', default_value = "1000,2000,4000,8000,16000")]
    pub t_values: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long)]
    pub tau: Option<usize>,
    /// Worker threads (0 uses every core)
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long)]
    pub no_center: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LagselectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Candidate lag set; repeat for each candidate. Accepts eeg1..eeg4
    #[arg(long = "lag-set", required = true)]
    pub lag_sets: Vec<String>,
    /// 1-based rows of the unmixing matrix to score (default all)
    #[arg(long, value_delimiter = ',')]
    pub rows: Option<Vec<usize>>,
    /// Autocorrelations are estimated up to this multiple of the largest lag
    #[arg(long, default_value_t = 12)]
    pub kmax_factor: usize,
    #[arg(long)]
    pub no_center: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::Separate(a) => run_separate(a),
        Command::Asv(a) => run_asv(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Lagselect(a) => run_lagselect(a),
    }
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let model = a.model.resolve()?;
    let x = commands::simulate(&model, a.length, a.seed, a.burn_in, a.mix)?;
    let header = a.header.then_some(if a.mix { "x" } else { "z" });
    io::write_series(io::output(a.output.as_deref())?, &x, header)
}

fn run_separate(a: SeparateArgs) -> Result<()> {
    let x = io::read_series(&a.data)?;
    let lags = parse_lags(&a.lags)?;
    let omega = a.omega.as_deref().map(io::read_matrix).transpose()?;
    let opts = EstimatorOptions { method: a.method, tau: a.tau, max_iter: a.max_iter, seed: a.seed };
    let (report, sources) = commands::separate(&x, &lags, !a.no_center, &opts, omega.as_ref())?;
    if let Some(path) = &a.output {
        io::write_series_file(path, &sources, a.header.then_some("s"))?;
    }
    let mut out = io::output(a.report.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn run_asv(a: AsvArgs) -> Result<()> {
    let model = a.model.resolve()?;
    let lags = parse_lags(&a.lags)?;
    let summary = commands::asymptotic_tables(&model, &lags, a.fourth_moments.as_deref())?;
    let mut w = csv::Writer::from_writer(io::output(a.output.as_deref())?);
    w.write_record(["method", "row", "col", "asv"])?;
    for table in [&summary.deflation, &summary.symmetric] {
        let p = table.p();
        for j in 0..p {
            for i in 0..p {
                w.write_record([
                    table.method.as_str().to_string(),
                    (j + 1).to_string(),
                    (i + 1).to_string(),
                    format_value(table.per_element[(j, i)]),
                ])?;
            }
        }
    }
    w.flush()?;
    let (defl, sym) = summary.global();
    let order: Vec<String> = summary.order.iter().map(|i| (i + 1).to_string()).collect();
    let text = format!(
        "method,global_criterion,component_order\ndeflation,{},{}\nsymmetric,{},{}\n",
        format_value(defl),
        order.join(" "),
        format_value(sym),
        order.join(" ")
    );
    match &a.summary {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => eprint!("{text}"),
    }
    Ok(())
}

fn run_benchmark(a: BenchmarkArgs) -> Result<()> {
    let cfg = BenchmarkConfig {
        model: a.model.resolve()?,
        lags: parse_lags(&a.lags)?,
        methods: a.methods,
        t_values: a.t_values,
        reps: a.reps,
        seed: a.seed,
        burn_in: a.burn_in,
        tau: a.tau,
        centered: !a.no_center,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let rows = pool.install(|| commands::benchmark(&cfg))?;
    let mut w = csv::Writer::from_writer(io::output(a.output.as_deref())?);
    w.write_record(["T", "method", "reps", "mean", "se", "asymptotic"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.method.to_string(),
            r.reps.to_string(),
            format_value(r.mean),
            format_value(r.se),
            r.asymptotic.map(format_value).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_lagselect(a: LagselectArgs) -> Result<()> {
    let x = io::read_series(&a.data)?;
    let candidates = a
        .lag_sets
        .iter()
        .map(|s| Ok(LagCandidate { name: s.clone(), lags: parse_lags(s)? }))
        .collect::<Result<Vec<_>>>()?;
    let rows = match &a.rows {
        Some(r) => Some(
            r.iter()
                .map(|&i| i.checked_sub(1).context("rows are numbered from 1"))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let table = commands::lagselect(&x, &candidates, rows.as_deref(), !a.no_center, a.kmax_factor)?;
    let labels: Vec<usize> = rows.unwrap_or_else(|| (0..x.p()).collect());
    let mut w = csv::Writer::from_writer(io::output(a.output.as_deref())?);
    let mut head = vec!["rank".to_string(), "lag_set".to_string(), "lags".to_string()];
    head.extend(labels.iter().map(|r| format!("row{}", r + 1)));
    head.push("total".into());
    w.write_record(&head)?;
    let mut ranked: Vec<_> = table.iter().collect();
    ranked.sort_by_key(|r| r.rank);
    for r in ranked {
        let mut rec = vec![r.rank.to_string(), r.name.clone(), format_lags(&r.lags)];
        rec.extend(r.row_sums.iter().map(|&v| format_value(v)));
        rec.push(format_value(r.total));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
