//! `usde-ctl`: simulate scenarios, compare controllers and check
//! super-twisting gains.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | `certify`: at least one joint fails the certificate |
//! | 2 | invalid input: bad flags, missing file, scenario schema error |
//! | 3 | a simulation diverged (traces are still written) |
//! | 4 | any other failure, e.g. an output file could not be written |

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{debug, info};

use usde_core::analysis::certificate::{
    alpha3, beta3, certify_all, eigenvalues, finite_time_bound, residual_level, sliding_band,
};
use usde_core::analysis::compare_controllers;
use usde_core::trace::{write_csv_path, write_long_csv, FloatFormat};
use usde_core::{run_variants, ControllerConfig, Error, RunResult, Scenario, Variant};

const LOG_ENV: &str = "USDE_CTL_LOG";

#[derive(Parser, Debug)]
#[command(
    name = "usde-ctl",
    version,
    about = "Simulate and compare USDE-based manipulator controllers"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 gains not certified, 2 invalid input, 3 diverged, 4 other failure.\n\
                        Log verbosity is read from USDE_CTL_LOG (e.g. USDE_CTL_LOG=info)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate controllers on a scenario and write `<controller>_trace.csv` for each.
    Run(RunArgs),
    /// Run controllers side by side and write metrics.csv, report.md and long-format traces.
    Compare(CompareArgs),
    /// Check super-twisting gains against the certificate and print the finite-time bound.
    Certify(CertifyArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
    /// Controllers to run: ctc, fg, ag, st, a comma-separated list of them, or all.
    #[arg(long, value_name = "LIST", default_value = "all", value_parser = parse_controllers)]
    controller: Controllers,
    /// Output directory, created if missing.
    #[arg(short, long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario's noise seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for concurrent runs (0 picks one per core).
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Write floats in shortest round-trip form instead of 9 significant digits.
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Metric window in seconds, `t0,t1` (default: the whole run).
    #[arg(long, value_name = "T0,T1", value_parser = parse_window)]
    window: Option<(f64, f64)>,
    /// Keep every n-th sample in the long-format traces.
    #[arg(long, value_name = "N", default_value_t = 10)]
    decimate: usize,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// T1 per joint, comma-separated (default: the seven-joint reference set).
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_negative_numbers = true)]
    t1: Vec<f64>,
    /// T2 per joint, comma-separated (default: the seven-joint reference set).
    #[arg(long, value_name = "LIST", value_delimiter = ',', allow_negative_numbers = true)]
    t2: Vec<f64>,
    /// Perturbation bound δ1, one value or one per joint.
    #[arg(
        long,
        value_name = "LIST",
        value_delimiter = ',',
        default_value = "0",
        allow_negative_numbers = true
    )]
    delta1: Vec<f64>,
    /// Perturbation bound δ2, one value or one per joint.
    #[arg(
        long,
        value_name = "LIST",
        value_delimiter = ',',
        default_value = "0",
        allow_negative_numbers = true
    )]
    delta2: Vec<f64>,
    /// Initial Lyapunov value V3(0); prints the finite-time bound t_f when given.
    #[arg(long, value_name = "F64", allow_negative_numbers = true)]
    v3: Option<f64>,
    /// Fraction θ0 in (0, 1) splitting the decay rate.
    #[arg(long, value_name = "F64", default_value_t = 0.5, allow_negative_numbers = true)]
    theta0: f64,
    /// Estimator filter constant k (s).
    #[arg(long, value_name = "F64", default_value_t = 0.08, allow_negative_numbers = true)]
    k: f64,
    /// Bound on ‖ḋ‖; prints the residual level and sliding band when given.
    #[arg(long, value_name = "F64", allow_negative_numbers = true)]
    d0: Option<f64>,
}

#[derive(Clone, Debug)]
struct Controllers(Vec<Variant>);

fn parse_controllers(s: &str) -> Result<Controllers, String> {
    if s.trim() == "all" {
        return Ok(Controllers(Variant::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let v: Variant = part.trim().parse().map_err(|_| {
            format!(
                "unknown controller `{}`; expected one of ctc, fg, ag, st, all",
                part.trim()
            )
        })?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(Controllers(out))
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let bad = || format!("expected `t0,t1` with t0 < t1, got `{s}`");
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let t0: f64 = a.trim().parse().map_err(|_| bad())?;
    let t1: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(bad());
    }
    Ok((t0, t1))
}

/// An error together with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn other(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 4,
            error: error.into(),
        }
    }

    fn from_core(error: Error) -> Self {
        match error {
            Error::Scenario(_)
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::TimeOutOfRange { .. }
            | Error::EmptyWindow { .. } => Self::input(error),
            other => Self::other(other),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load_scenario(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::from_path(&args.scenario)
        .with_context(|| format!("cannot load scenario {}", args.scenario.display()))
        .map_err(Failure::input)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    debug!("loaded scenario `{}` ({} joints)", scenario.name, scenario.dof());
    Ok(scenario)
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::other)
}

fn float_format(exact: bool) -> FloatFormat {
    if exact {
        FloatFormat::RoundTrip
    } else {
        FloatFormat::default()
    }
}

fn report_divergence(runs: &[RunResult]) -> u8 {
    let mut code = 0;
    for run in runs {
        if let Some(t) = run.diverged_at {
            eprintln!("error: {} diverged at t = {t:.4} s", run.variant.label());
            code = 3;
        }
    }
    code
}

fn cmd_run(args: &RunArgs) -> Outcome {
    let scenario = load_scenario(args)?;
    prepare_out(&args.out)?;
    let runs = run_variants(&scenario, &args.controller.0, args.jobs).map_err(Failure::from_core)?;
    for run in &runs {
        let path = args.out.join(format!("{}_trace.csv", run.variant));
        write_csv_path(&run.trace, &path, float_format(args.exact))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::other)?;
        info!("wrote {} ({} samples)", path.display(), run.trace.len());
    }
    Ok(report_divergence(&runs))
}

fn cmd_compare(args: &CompareArgs) -> Outcome {
    let scenario = load_scenario(&args.run)?;
    prepare_out(&args.run.out)?;
    let window = args.window.unwrap_or((0.0, scenario.duration));
    let (report, runs) =
        compare_controllers(&scenario, &args.run.controller.0, window, args.run.jobs).map_err(Failure::from_core)?;
    let fmt = float_format(args.run.exact);
    let out = &args.run.out;

    let write = |name: &str, f: &dyn Fn(BufWriter<File>) -> anyhow::Result<()>| -> Result<(), Failure> {
        let path = out.join(name);
        File::create(&path)
            .map_err(anyhow::Error::from)
            .and_then(|file| f(BufWriter::new(file)))
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(Failure::other)?;
        info!("wrote {}", path.display());
        Ok(())
    };
    write("metrics.csv", &|w| Ok(report.write_metrics_csv(w)?))?;
    let markdown = report.to_markdown();
    write("report.md", &|mut w| {
        use std::io::Write;
        w.write_all(markdown.as_bytes())?;
        Ok(w.flush()?)
    })?;
    for run in &runs {
        write(&format!("{}_long.csv", run.variant), &|w| {
            Ok(write_long_csv(&run.trace, w, args.decimate, fmt)?)
        })?;
    }
    print!("{markdown}");
    Ok(report_divergence(&runs))
}

/// Repeats a single value `n` times; otherwise requires exactly `n` values.
fn per_joint(name: &str, values: &[f64], n: usize) -> anyhow::Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(anyhow!("--{name} has {len} values, expected 1 or {n}")),
    }
}

fn cmd_certify(args: &CertifyArgs) -> Outcome {
    if !(args.theta0 > 0.0 && args.theta0 < 1.0) {
        return Err(Failure::input(anyhow!(
            "--theta0 must lie in (0, 1), got {}",
            args.theta0
        )));
    }
    if !(args.k > 0.0 && args.k.is_finite()) {
        return Err(Failure::input(anyhow!("--k must be finite and > 0, got {}", args.k)));
    }
    let reference = ControllerConfig::seven_dof_reference();
    let t1 = if args.t1.is_empty() {
        reference.t1.as_slice().to_vec()
    } else {
        args.t1.clone()
    };
    let t2 = if args.t2.is_empty() {
        reference.t2.as_slice().to_vec()
    } else {
        args.t2.clone()
    };
    let n = t1.len().max(t2.len());
    let expand = |name, v: &[f64]| per_joint(name, v, n).map_err(Failure::input);
    let (t1, t2) = (expand("t1", &t1)?, expand("t2", &t2)?);
    let (delta1, delta2) = (expand("delta1", &args.delta1)?, expand("delta2", &args.delta2)?);
    let certs = certify_all(&t1, &t2, &delta1, &delta2).map_err(Failure::from_core)?;

    println!("joint       T1       T2   delta1   delta2   lmin(P)   lmin(Q)        gamma  certified");
    for (i, c) in certs.iter().enumerate() {
        println!(
            "{:>5} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>9.3e} {:>9.3e} {:>12.5e}  {}",
            i + 1,
            c.t1,
            c.t2,
            c.delta1,
            c.delta2,
            eigenvalues(&c.p)[0],
            eigenvalues(&c.q)[0],
            c.gamma,
            if c.pd_ok { "yes" } else { "no" }
        );
    }
    let failing: Vec<String> = certs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.pd_ok)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    if !failing.is_empty() {
        println!("not certified: joints {}", failing.join(", "));
        return Ok(1);
    }

    let a3 = alpha3(&certs, args.k).map_err(Failure::from_core)?;
    println!("alpha3 = {a3:.6e}");
    if let Some(v3) = args.v3 {
        let tf = finite_time_bound(v3, a3, args.theta0).map_err(Failure::from_core)?;
        println!("t_f = {tf:.6e} s  (V3(0) = {v3}, theta0 = {})", args.theta0);
    }
    if let Some(d0) = args.d0 {
        let level = residual_level(a3, beta3(args.k, d0), args.theta0).map_err(Failure::from_core)?;
        println!("residual level V3 <= {level:.6e}");
        for (i, c) in certs.iter().enumerate() {
            println!("  joint {}: |S| <= {:.6e}", i + 1, sliding_band(level, c));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Certify(args) => cmd_certify(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
