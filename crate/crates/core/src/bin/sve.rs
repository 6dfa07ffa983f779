//! `sve`: convergence experiments, CPU benchmarks, regularity probes and
//! sum-of-exponentials utilities for stochastic Volterra equations.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sve_core::harness::{
    bench_cpu, pow2_levels, regularity_probe, run_convergence, BenchConfig, ExperimentConfig,
    Preset, RegularityConfig,
};
use sve_core::{build_soe, GradedMesh, Result, SchemeKind, SoeApprox, SveError};

#[derive(Parser)]
#[command(
    name = "sve",
    version,
    about = "Stochastic Volterra equation solvers and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo strong errors and fitted convergence orders.
    Converge(ConvergeArgs),
    /// Single-path CPU time of EM against fast EM.
    Bench(BenchArgs),
    /// L² modulus of continuity of the reference solution.
    Regularity(RegularityArgs),
    /// Build or check sum-of-exponentials expansions of t^{-γ}.
    #[command(subcommand)]
    Soe(SoeCommand),
    /// Graded mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCommand),
}

#[derive(Args)]
struct ProblemArgs {
    /// Registered problem: `example41` (sine/cosine) or `affine`.
    #[arg(long, default_value = "example41")]
    preset: String,
    /// Affine problem: f = a1 x + a0, g = b1 x + b0.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a0: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    b1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    b0: f64,
    /// Affine problem: initial state.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    x0: f64,
    /// Affine problem: time horizon.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
}

impl ProblemArgs {
    fn preset(&self) -> Result<Preset> {
        match self.preset.as_str() {
            "example41" => Ok(Preset::SineCosine),
            "affine" => Ok(Preset::Affine {
                horizon: self.horizon,
                x0: self.x0,
                a1: self.a1,
                a0: self.a0,
                b1: self.b1,
                b0: self.b0,
            }),
            other => Err(SveError::InvalidParameter(format!(
                "unknown preset `{other}`"
            ))),
        }
    }
}

#[derive(Args)]
struct ConvergeArgs {
    /// em, fast-em or milstein.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Grading exponent.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Step counts 2^LO..2^HI.
    #[arg(long, default_value = "6:9")]
    levels: String,
    /// Reference step count, e.g. 4096 or 2^12.
    #[arg(long, default_value = "2^12")]
    nref: String,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expansion tolerance for fast EM.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Milstein: evaluate the stochastic integrals on a path K times finer
    /// than each level (required for beta > 0).
    #[arg(long)]
    milstein_inner: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Step counts 2^LO..2^HI.
    #[arg(long, default_value = "7:11")]
    levels: String,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Timed repetitions per level (median reported, at least 5).
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegularityArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Grading exponent of the reference mesh.
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    /// Reference step count, e.g. 4096 or 2^12.
    #[arg(long, default_value = "2^12")]
    nref: String,
    #[arg(long, default_value_t = 10000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SoeCommand {
    /// Build a certified expansion and write it as CSV.
    Build {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a stored expansion on a log-spaced grid.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 16384)]
        grid: usize,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Print the nodes t_0..t_N, one per line, at full precision.
    Dump {
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
}

fn invalid(msg: impl Into<String>) -> SveError {
    SveError::InvalidParameter(msg.into())
}

/// `LO:HI` → `2^LO, ..., 2^HI`.
fn parse_levels(spec: &str) -> Result<Vec<usize>> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| invalid(format!("levels must look like LO:HI, got `{spec}`")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|_| invalid(format!("bad level exponent `{s}`")))
    };
    let (lo, hi) = (parse(lo)?, parse(hi)?);
    if lo > hi || hi > 30 {
        return Err(invalid(format!(
            "level exponents must satisfy LO <= HI <= 30, got {lo}:{hi}"
        )));
    }
    Ok(pow2_levels(lo, hi))
}

/// `4096` or `2^12`.
fn parse_count(spec: &str) -> Result<usize> {
    let bad = || invalid(format!("bad step count `{spec}`"));
    match spec.split_once('^') {
        Some(("2", k)) => {
            let k: u32 = k.trim().parse().map_err(|_| bad())?;
            1usize.checked_shl(k).filter(|_| k < 48).ok_or_else(bad)
        }
        Some(_) => Err(bad()),
        None => spec.trim().parse().map_err(|_| bad()),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn converge(args: &ConvergeArgs) -> Result<()> {
    let scheme: SchemeKind = args.scheme.parse()?;
    let config = ExperimentConfig {
        preset: args.problem.preset()?,
        scheme,
        alpha: args.alpha,
        beta: args.beta,
        r: args.r,
        levels: parse_levels(&args.levels)?,
        n_ref: parse_count(&args.nref)?,
        paths: args.paths,
        seed: args.seed,
        eps: args.eps,
        p: 2.0,
        milstein_inner: args.milstein_inner,
        threads: args.threads,
    };
    let report = run_convergence(&config)?;
    let mut out = output(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    let fmt = |o: Option<f64>| o.map_or_else(|| "NA".into(), |v| format!("{v:.4}"));
    eprintln!(
        "{scheme}: order_end={} order_max={} (theory {:.4} / {:.4}), {} paths",
        fmt(report.order_end),
        fmt(report.order_max),
        report.theory.order_end,
        report.theory.order_max,
        report.paths_used
    );
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        preset: args.problem.preset()?,
        alpha: args.alpha,
        beta: args.beta,
        r: args.r,
        levels: parse_levels(&args.levels)?,
        eps: args.eps,
        reps: args.reps,
        seed: args.seed,
    };
    let report = bench_cpu(&config)?;
    let mut out = output(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    eprintln!(
        "time slopes: em={:.3} fast-em={:.3}",
        report.em_slope, report.fast_em_slope
    );
    Ok(())
}

fn regularity(args: &RegularityArgs) -> Result<()> {
    let problem = args.problem.preset()?.build(args.alpha, args.beta)?;
    let mut config = RegularityConfig::new(parse_count(&args.nref)?, args.r, args.paths, args.seed);
    config.threads = args.threads;
    let report = regularity_probe(&problem, &config)?;
    let mut out = output(&args.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn soe(cmd: &SoeCommand) -> Result<()> {
    match cmd {
        SoeCommand::Build {
            gamma,
            delta,
            horizon,
            eps,
            out,
        } => {
            let approx = build_soe(*gamma, *delta, *horizon, *eps)?;
            let mut w = output(out)?;
            approx.write_csv(&mut w)?;
            w.flush()?;
            eprintln!("{} terms", approx.len());
        }
        SoeCommand::Verify { input, grid } => {
            let approx = SoeApprox::read_csv(BufReader::new(File::open(input)?))?;
            if *grid < 2 {
                return Err(invalid("grid needs at least 2 points"));
            }
            let err = approx.verify(*grid);
            println!(
                "max_abs_err={err:e} eps={:e} terms={}",
                approx.eps(),
                approx.len()
            );
            if !(err <= approx.eps()) {
                return Err(SveError::SoeBuildFailure {
                    achieved: err,
                    eps: approx.eps(),
                });
            }
        }
    }
    Ok(())
}

fn mesh(cmd: &MeshCommand) -> Result<()> {
    let MeshCommand::Dump { horizon, n, r } = cmd;
    let mesh = GradedMesh::new(*horizon, *n, *r)?;
    let mut out = BufWriter::new(io::stdout().lock());
    for t in mesh.points() {
        writeln!(out, "{t:e}")?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Converge(a) => converge(a),
        Command::Bench(a) => bench(a),
        Command::Regularity(a) => regularity(a),
        Command::Soe(c) => soe(c),
        Command::Mesh(c) => mesh(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
