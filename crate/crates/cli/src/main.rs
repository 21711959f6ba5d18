//! Command-line harness: sampling, calibration, integration, experiments,
//! spherical diagnostics, wall-time benchmarks, and comparison figures.
//!
//! Every command is a pure function of (arguments, seed, calibration table):
//! repeated runs write byte-identical artifacts (the one exception is `bench`,
//! whose measured wall times are genuinely nondeterministic — the sampled
//! configurations behind them are not). Bad flags exit 2 (clap), runtime
//! failures exit 1 with the error on stderr.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use hermite_dpp::basis::{KernelEval, OrderedBasis};
use hermite_dpp::dpp::{DppSampler, SampleCounters};
use hermite_dpp::experiments::gp::{run_gp_experiment, GpConfig};
use hermite_dpp::experiments::poly::{run_poly_experiment, PolyConfig, PolynomialIntegrand};
use hermite_dpp::mc::{bh_estimate, ez_estimate, naive_estimate, EstimateReport};
use hermite_dpp::rmt::{self, CalibrationTable};
use hermite_dpp::rng::{run_reps, substream};
use hermite_dpp::spherical::{acceptance_report, SphericalIndex};
use hermite_dpp::stats::{mean, std_dev};

use hermite_dpp_cli::artifacts::{
    finish_csv, load_calibration, sidecar, write_atomic, write_json_atomic, Manifest,
};
use hermite_dpp_cli::comparison;

const TAG_SAMPLE_DPP: u64 = 0xC1;
const TAG_SAMPLE_RHO: u64 = 0xC2;
const TAG_INT_NAIVE: u64 = 0xC3;
const TAG_INT_DPP: u64 = 0xC4;
const TAG_INT_COEFFS: u64 = 0xC5;
const TAG_BENCH: u64 = 0xC7;
const TAG_SPHERICAL: u64 = 0xC8;

#[derive(Parser)]
#[command(name = "hermite-dpp", version, about = "Hermite-kernel DPP sampling and DPP Monte Carlo")]
struct Cli {
    /// Calibration table JSON (falls back to $HERMITE_DPP_CALIBRATION, then to
    /// in-memory lazy calibration).
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw repeated N-point DPP samples; CSV of points plus counter sidecar.
    SampleDpp(SampleDppArgs),
    /// Draw from the spectral density ρ_n by rejection or from the GUE oracle.
    SampleRho(SampleRhoArgs),
    /// Precompute the per-n rejection calibration table.
    Calibrate(CalibrateArgs),
    /// Estimate ∫f·e^{−‖x‖²/2}dx for a seeded random polynomial f.
    Integrate(IntegrateArgs),
    /// End-to-end experiment reproductions.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Bound/acceptance diagnostics of the direction-only spherical basis.
    SphericalDiag(SphericalDiagArgs),
    /// Wall-time profile of the sampler over (d, N).
    Bench(BenchArgs),
    /// Matched DPP / iid-Gaussian / Poisson point sets (d = 2).
    EmitComparison(EmitComparisonArgs),
}

#[derive(clap::Args, Serialize)]
struct SampleDppArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long)]
    n_points: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum RhoMethod {
    /// Mixture-proposal rejection sampler.
    Reject,
    /// Tridiagonal GUE spectrum, one eigenvalue picked uniformly.
    Oracle,
    /// Dense Hermitian GUE spectrum (slow; cross-check only).
    Dense,
}

#[derive(clap::Args, Serialize)]
struct SampleRhoArgs {
    /// Matrix size n of ρ_n.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = RhoMethod::Reject)]
    method: RhoMethod,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Serialize)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    /// Half-width padding beyond the spectral edge 2√n.
    #[arg(long, default_value_t = 10.0)]
    pad: f64,
    #[arg(long, default_value_t = 20_001)]
    grid_points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum EstimatorKind {
    Naive,
    Bh,
    Ez,
}

impl EstimatorKind {
    fn name(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Bh => "bh",
            EstimatorKind::Ez => "ez",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(clap::Args, Serialize)]
struct IntegrateArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorKind,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Degree of the random polynomial integrand (coefficients U(−1,1),
    /// frozen by the seed).
    #[arg(long, default_value_t = 5)]
    degree: usize,
    #[arg(long)]
    n_points: usize,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Polynomial integration sweep over N for the three estimators.
    Poly(ExperimentPolyArgs),
    /// GP hyperparameter-marginalisation dispersion study.
    Gp(ExperimentGpArgs),
}

#[derive(clap::Args, Serialize)]
struct ExperimentPolyArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Defaults to 10 in d = 1 and 5 otherwise.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 40, 70, 100, 140, 200])]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
struct ExperimentGpArgs {
    #[arg(long, default_value_t = 30)]
    reps: usize,
    #[arg(long, default_value_t = 20)]
    n_points: usize,
    /// Size of the iid reference batch fixing the query levels.
    #[arg(long, default_value_t = 2000)]
    reference_nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(clap::Args, Serialize)]
struct SphericalDiagArgs {
    /// Multi-index n₁,…,n_d (n_d ∈ {0,1}).
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    index: Vec<usize>,
    /// Optional dimension check against the index length.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2])]
    dims: Vec<usize>,
    /// N grid as start:stop:step.
    #[arg(long, default_value = "10:100:10")]
    n_grid: String,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Serialize)]
struct EmitComparisonArgs {
    #[arg(long, default_value_t = 500)]
    n_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let calibration = cli.calibration.as_deref();
    match cli.command {
        Command::SampleDpp(args) => cmd_sample_dpp(args, calibration),
        Command::SampleRho(args) => cmd_sample_rho(args, calibration),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Integrate(args) => cmd_integrate(args, calibration),
        Command::Experiment(ExperimentCmd::Poly(args)) => cmd_experiment_poly(args),
        Command::Experiment(ExperimentCmd::Gp(args)) => cmd_experiment_gp(args),
        Command::SphericalDiag(args) => cmd_spherical(args),
        Command::Bench(args) => cmd_bench(args, calibration),
        Command::EmitComparison(args) => cmd_emit_comparison(args, calibration),
    }
}

fn fold_counters<'a>(all: impl IntoIterator<Item = &'a SampleCounters>) -> SampleCounters {
    let mut agg = SampleCounters::default();
    for c in all {
        agg.rho.merge(&c.rho);
        agg.general.merge(&c.general);
        agg.chain.merge(&c.chain);
        agg.jitters += c.jitters;
        agg.restarts += c.restarts;
        agg.min_alpha = agg.min_alpha.min(c.min_alpha);
        agg.max_alpha = agg.max_alpha.max(c.max_alpha);
    }
    agg
}

fn points_csv(points: &[(usize, &[Vec<f64>])], dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rep".to_string(), "point_index".to_string()];
    header.extend((1..=dim).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for (rep, pts) in points {
        for (i, p) in pts.iter().enumerate() {
            let mut rec = vec![rep.to_string(), i.to_string()];
            rec.extend(p.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
    }
    finish_csv(w)
}

fn cmd_sample_dpp(args: SampleDppArgs, calibration: Option<&Path>) -> Result<()> {
    let (mut table, source) = load_calibration(calibration)?;
    let sampler = DppSampler::new(args.dim, args.n_points, &mut table)?;
    let samples = run_reps(args.seed, TAG_SAMPLE_DPP, args.reps, |_, rng| sampler.sample(rng))
        .into_iter()
        .collect::<hermite_dpp::Result<Vec<_>>>()?;

    let rows: Vec<(usize, &[Vec<f64>])> =
        samples.iter().enumerate().map(|(r, s)| (r, s.points.as_slice())).collect();
    write_atomic(&args.out, &points_csv(&rows, args.dim)?)?;

    #[derive(Serialize)]
    struct CountersSidecar {
        aggregate: SampleCounters,
        rho_acceptance: f64,
        general_acceptance: f64,
        chain_acceptance: f64,
        per_rep: Vec<SampleCounters>,
    }
    let agg = fold_counters(samples.iter().map(|s| &s.counters));
    let sc = CountersSidecar {
        aggregate: agg,
        rho_acceptance: agg.rho.rate(),
        general_acceptance: agg.general.rate(),
        chain_acceptance: agg.chain.rate(),
        per_rep: samples.iter().map(|s| s.counters).collect(),
    };
    write_json_atomic(&sidecar(&args.out, "counters"), &sc)?;

    Manifest::new("sample-dpp", Some(args.seed), &args)?
        .with_table(source, &table)?
        .output(&args.out)
        .output(&sidecar(&args.out, "counters"))
        .write(&sidecar(&args.out, "manifest"))
}

fn cmd_sample_rho(args: SampleRhoArgs, calibration: Option<&Path>) -> Result<()> {
    let mut rng = substream(args.seed, &[TAG_SAMPLE_RHO, args.n as u64]);
    let mut counters = rmt::RejectionCounters::default();
    let (mut table, source) = load_calibration(calibration)?;
    let values: Vec<f64> = match args.method {
        RhoMethod::Reject => {
            let calib = table.get_or_calibrate(args.n)?.clone();
            (0..args.draws)
                .map(|_| rmt::sample_rho_counted(args.n, &calib, &mut rng, &mut counters))
                .collect::<hermite_dpp::Result<_>>()?
        }
        RhoMethod::Oracle => (0..args.draws)
            .map(|_| rmt::sample_rho_oracle(args.n, &mut rng))
            .collect::<hermite_dpp::Result<_>>()?,
        RhoMethod::Dense => (0..args.draws)
            .map(|_| {
                let spec = rmt::gue_dense_spectrum(args.n, &mut rng)?;
                Ok(spec.eigenvalues[rng.gen_range(0..args.n)])
            })
            .collect::<hermite_dpp::Result<_>>()?,
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["draw", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v}")])?;
    }
    write_atomic(&args.out, &finish_csv(w)?)?;

    let mut manifest = Manifest::new("sample-rho", Some(args.seed), &args)?.output(&args.out);
    if matches!(args.method, RhoMethod::Reject) {
        #[derive(Serialize)]
        struct RhoSidecar {
            calibration: rmt::RejectionCalibration,
            proposals: u64,
            accepts: u64,
            acceptance: f64,
        }
        let sc = RhoSidecar {
            calibration: table.get(args.n).expect("populated above").clone(),
            proposals: counters.proposals,
            accepts: counters.accepts,
            acceptance: counters.rate(),
        };
        write_json_atomic(&sidecar(&args.out, "counters"), &sc)?;
        manifest = manifest
            .with_table(source, &table)?
            .output(&sidecar(&args.out, "counters"));
    }
    manifest.write(&sidecar(&args.out, "manifest"))
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    if args.n_min < 1 || args.n_min > args.n_max {
        bail!("need 1 <= n-min <= n-max, got {}..{}", args.n_min, args.n_max);
    }
    let mut entries = Vec::with_capacity(args.n_max - args.n_min + 1);
    for n in args.n_min..=args.n_max {
        let calib = rmt::calibrate(n, args.pad, args.grid_points)?;
        log::info!("n = {n}: bound {:.5}, acceptance {:.4}", calib.bound, calib.acceptance);
        entries.push(calib);
    }
    let table = CalibrationTable::from_entries(entries);
    write_json_atomic(&args.out, &table)?;
    Manifest::new("calibrate", None, &args)?
        .with_table(hermite_dpp_cli::artifacts::TableSource::Flag(args.out.clone()), &table)?
        .output(&args.out)
        .write(&sidecar(&args.out, "manifest"))
}

fn cmd_integrate(args: IntegrateArgs, calibration: Option<&Path>) -> Result<()> {
    let mut coeff_rng = substream(args.seed, &[TAG_INT_COEFFS]);
    let poly = PolynomialIntegrand::random(args.dim, args.degree, &mut coeff_rng);
    let truth = poly.truth_weighted();
    let f = |x: &[f64]| poly.eval(x);

    let (values, ill): (Vec<f64>, usize) = match args.estimator {
        EstimatorKind::Naive => {
            let vals = run_reps(args.seed, TAG_INT_NAIVE, args.reps, |_, rng| {
                naive_estimate(f, args.dim, args.n_points, rng)
            });
            (vals, 0)
        }
        kind => {
            let (mut table, _) = load_calibration(calibration)?;
            let sampler = DppSampler::new(args.dim, args.n_points, &mut table)?;
            let kernel = KernelEval::new(OrderedBasis::new(args.dim, args.n_points)?);
            let results = run_reps(args.seed, TAG_INT_DPP, args.reps, |_, rng| {
                let sample = sampler.sample(rng)?;
                match kind {
                    EstimatorKind::Bh => {
                        bh_estimate(f, &sample.points, &kernel).map(|v| (v, false))
                    }
                    EstimatorKind::Ez => ez_estimate(f, &sample.points, &kernel)
                        .map(|sol| (sol.estimate, sol.ill_conditioned)),
                    EstimatorKind::Naive => unreachable!("handled above"),
                }
            })
            .into_iter()
            .collect::<hermite_dpp::Result<Vec<_>>>()?;
            let ill = results.iter().filter(|(_, flag)| *flag).count();
            (results.into_iter().map(|(v, _)| v).collect(), ill)
        }
    };

    let report =
        EstimateReport::from_values(args.estimator.name(), args.dim, args.n_points, &values, ill);

    #[derive(Serialize)]
    struct IntegrateOutput {
        degree: usize,
        truth: f64,
        report: EstimateReport,
    }
    let out = IntegrateOutput { degree: args.degree, truth, report };

    let bytes = match args.format {
        OutputFormat::Json => {
            let mut b = serde_json::to_vec_pretty(&out)?;
            b.push(b'\n');
            b
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "estimator",
                "dim",
                "degree",
                "n_points",
                "reps",
                "mean",
                "std_dev",
                "std_err",
                "truth",
                "ill_conditioned_reps",
            ])?;
            w.write_record([
                out.report.estimator.clone(),
                out.report.dim.to_string(),
                out.degree.to_string(),
                out.report.n_points.to_string(),
                out.report.reps.to_string(),
                format!("{}", out.report.mean),
                format!("{}", out.report.std_dev),
                format!("{}", out.report.std_err),
                format!("{}", out.truth),
                out.report.ill_conditioned_reps.to_string(),
            ])?;
            finish_csv(w)?
        }
    };

    match &args.out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            Manifest::new("integrate", Some(args.seed), &args)?
                .output(path)
                .write(&sidecar(path, "manifest"))
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn cmd_experiment_poly(args: ExperimentPolyArgs) -> Result<()> {
    let mut config = PolyConfig::reference(args.dim, args.seed);
    if let Some(deg) = args.degree {
        config.degree = deg;
    }
    config.n_grid = args.n_grid.clone();
    config.reps = args.reps;
    let rows = run_poly_experiment(&config)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row)?;
    }
    let out = args.out_dir.join("poly.csv");
    write_atomic(&out, &finish_csv(w)?)?;
    Manifest::new("experiment poly", Some(args.seed), &args)?
        .output(&out)
        .write(&args.out_dir.join("manifest.json"))
}

fn cmd_experiment_gp(args: ExperimentGpArgs) -> Result<()> {
    let config = GpConfig {
        seed: args.seed,
        reps: args.reps,
        n_points: args.n_points,
        reference_nodes: args.reference_nodes,
    };
    let result = run_gp_experiment(&config)?;
    let out = args.out_dir.join("gp.json");
    write_json_atomic(&out, &result)?;
    Manifest::new("experiment gp", Some(args.seed), &args)?
        .output(&out)
        .write(&args.out_dir.join("manifest.json"))
}

fn cmd_spherical(args: SphericalDiagArgs) -> Result<()> {
    if let Some(d) = args.dim {
        if d != args.index.len() {
            bail!("--dim {d} does not match index length {}", args.index.len());
        }
    }
    let index = SphericalIndex::new(args.index.clone())?;
    let mut rng = substream(args.seed, &[TAG_SPHERICAL]);
    let report = acceptance_report(&index, args.trials, &mut rng);
    if report.violations > 0 {
        log::warn!(
            "bound violated on {} of {} draws: M is not a uniform bound for this index",
            report.violations,
            report.trials
        );
    }
    match &args.out {
        Some(path) => {
            write_json_atomic(path, &report)?;
            Manifest::new("spherical-diag", Some(args.seed), &args)?
                .output(path)
                .write(&sidecar(path, "manifest"))
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn parse_span(s: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        bail!("--n-grid expects start:stop:step, got {s:?}");
    };
    let (start, stop, step): (usize, usize, usize) =
        (start.parse()?, stop.parse()?, step.parse()?);
    if step == 0 || start == 0 || stop < start {
        bail!("--n-grid needs 0 < start <= stop and step > 0, got {s:?}");
    }
    Ok((start..=stop).step_by(step).collect())
}

#[derive(Serialize)]
struct BenchRecord {
    dim: usize,
    n_points: usize,
    reps: usize,
    mean_ms: f64,
    std_ms: f64,
    times_ms: Vec<f64>,
    counters: SampleCounters,
}

fn cmd_bench(args: BenchArgs, calibration: Option<&Path>) -> Result<()> {
    let n_grid = parse_span(&args.n_grid)?;
    let (mut table, source) = load_calibration(calibration)?;
    let mut records = Vec::new();
    for &d in &args.dims {
        for &n in &n_grid {
            let sampler = DppSampler::new(d, n, &mut table)?;
            let mut times = Vec::with_capacity(args.reps);
            let mut counters = Vec::with_capacity(args.reps);
            for rep in 0..args.reps {
                let mut rng = substream(args.seed, &[TAG_BENCH, d as u64, n as u64, rep as u64]);
                let t0 = Instant::now();
                let sample = sampler.sample(&mut rng)?;
                times.push(t0.elapsed().as_secs_f64() * 1e3);
                counters.push(sample.counters);
            }
            let agg = fold_counters(counters.iter());
            log::info!("d = {d}, N = {n}: {:.2} ms mean", mean(&times));
            records.push(BenchRecord {
                dim: d,
                n_points: n,
                reps: args.reps,
                mean_ms: mean(&times),
                std_ms: std_dev(&times),
                times_ms: times,
                counters: agg,
            });
        }
    }

    let bytes = match args.format {
        OutputFormat::Json => {
            let mut b = serde_json::to_vec_pretty(&records)?;
            b.push(b'\n');
            b
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "dim",
                "n_points",
                "reps",
                "mean_ms",
                "std_ms",
                "rho_proposals",
                "rho_accepts",
                "general_proposals",
                "general_accepts",
                "chain_proposals",
                "chain_accepts",
                "jitters",
                "restarts",
            ])?;
            for r in &records {
                w.write_record([
                    r.dim.to_string(),
                    r.n_points.to_string(),
                    r.reps.to_string(),
                    format!("{}", r.mean_ms),
                    format!("{}", r.std_ms),
                    r.counters.rho.proposals.to_string(),
                    r.counters.rho.accepts.to_string(),
                    r.counters.general.proposals.to_string(),
                    r.counters.general.accepts.to_string(),
                    r.counters.chain.proposals.to_string(),
                    r.counters.chain.accepts.to_string(),
                    r.counters.jitters.to_string(),
                    r.counters.restarts.to_string(),
                ])?;
            }
            finish_csv(w)?
        }
    };

    match &args.out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            Manifest::new("bench", Some(args.seed), &args)?
                .with_table(source, &table)?
                .output(path)
                .write(&sidecar(path, "manifest"))
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn cmd_emit_comparison(args: EmitComparisonArgs, calibration: Option<&Path>) -> Result<()> {
    let (mut table, source) = load_calibration(calibration)?;
    let sets = comparison::generate(args.n_points, args.seed, &mut table)
        .context("generating comparison point sets")?;

    let files = [
        ("dpp.csv", &sets.dpp),
        ("gaussian.csv", &sets.gaussian),
        ("poisson.csv", &sets.poisson),
    ];
    let mut manifest = Manifest::new("emit-comparison", Some(args.seed), &args)?
        .with_table(source, &table)?;
    for (name, pts) in files {
        let path = args.out_dir.join(name);
        let rows = [(0usize, pts.as_slice())];
        write_atomic(&path, &points_csv(&rows, 2)?)?;
        manifest = manifest.output(&path);
    }

    #[derive(Serialize)]
    struct ComparisonMeta {
        half_width: f64,
        poisson_count: usize,
        counters: SampleCounters,
    }
    let meta = ComparisonMeta {
        half_width: sets.half_width,
        poisson_count: sets.poisson.len(),
        counters: sets.counters,
    };
    let meta_path = args.out_dir.join("comparison.meta.json");
    write_json_atomic(&meta_path, &meta)?;
    manifest.output(&meta_path).write(&args.out_dir.join("manifest.json"))
}
