use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ratdet::estimators::{Algorithm, EstimatorConfig, LanczosOperator, DEFAULT_LANCZOS_ITERS};
use ratdet::harness::{
    emit_json, run_single, run_sweep, verify, write_csv, BenchRecord, CsvSink, RunConfig, SweepParam,
    SweepSpec, DEFAULT_EXACT_CUTOFF, DEFAULT_TRIALS,
};
use ratdet::kernels::{KernelFamily, DEFAULT_JITTER};
use ratdet::precond::{PreconditionerConfig, PreconditionerKind, DEFAULT_NUM_ITERS, DEFAULT_RANK};
use ratdet::probes::{ProbeKind, DEFAULT_PROBES};

#[derive(Parser)]
#[command(name = "ratdet", version, about = "Stochastic log-determinant estimation for kernel matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate log det of one sampled kernel matrix.
    Logdet(LogdetArgs),
    /// Run a seeded parameter sweep and write the records.
    Bench(BenchArgs),
    /// Run the built-in numerical self-checks.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, default_value = "matern52", value_parser = parse_with::<KernelFamily>)]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    jitter: f64,
    #[arg(long, default_value_t = DEFAULT_PROBES)]
    probes: usize,
    #[arg(long, default_value = "rademacher", value_parser = parse_with::<ProbeKind>)]
    probe_kind: ProbeKind,
    #[arg(long, default_value_t = DEFAULT_LANCZOS_ITERS)]
    lanczos_iters: usize,
    #[arg(long, default_value = "rand-svd", value_parser = parse_with::<PreconditionerKind>)]
    precond: PreconditionerKind,
    #[arg(long, default_value_t = DEFAULT_RANK)]
    precond_rank: usize,
    #[arg(long, default_value_t = DEFAULT_NUM_ITERS)]
    precond_iters: usize,
    /// Constant `a` of the scaled preconditioners; defaults to the jitter.
    #[arg(long)]
    precond_scale: Option<f64>,
    /// Operator Lanczos runs on: `split` (L⁻¹ M L⁻ᵗ) or `plain` (M P⁻¹).
    #[arg(long, default_value = "split", value_parser = parse_with::<LanczosOperator>)]
    lanczos_operator: LanczosOperator,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the Cholesky reference above this size.
    #[arg(long, default_value_t = DEFAULT_EXACT_CUTOFF)]
    exact_cutoff: usize,
}

impl ProblemArgs {
    fn run_config(&self, algorithm: Algorithm) -> RunConfig {
        RunConfig {
            kernel: self.kernel,
            n: self.n,
            d: self.d,
            jitter: self.jitter,
            estimator: EstimatorConfig {
                algorithm,
                probes: self.probes,
                lanczos_iters: self.lanczos_iters,
                probe_kind: self.probe_kind,
                precond: PreconditionerConfig {
                    kind: self.precond,
                    rank: self.precond_rank,
                    num_iters: self.precond_iters,
                    scale: self.precond_scale.unwrap_or(self.jitter),
                    ..Default::default()
                },
                operator: self.lanczos_operator,
                seed: self.seed,
            },
            exact_cutoff: self.exact_cutoff,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plain,
}

#[derive(Args)]
struct LogdetArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value = "r3", value_parser = parse_with::<Algorithm>)]
    algorithm: Algorithm,
    #[arg(long, value_enum, default_value_t = Format::Plain)]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_parser = parse_with::<SweepParam>)]
    sweep: SweepParam,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "r1,r3,r5,slq", value_parser = parse_with::<Algorithm>)]
    algorithms: Vec<Algorithm>,
    /// Output file; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Tolerance for the partial-fraction table check.
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
}

fn parse_with<T: std::str::FromStr<Err = ratdet::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: ratdet::Error| e.to_string())
}

fn print_plain(rec: &BenchRecord, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "algorithm:    {}", rec.algorithm)?;
    writeln!(out, "kernel:       {} (n={}, d={}, jitter={:e})", rec.kernel_family, rec.n, rec.d, rec.jitter)?;
    writeln!(out, "precond:      {} (k={}, iters={})", rec.precond_kind, rec.precond_rank, rec.precond_iters)?;
    writeln!(out, "probes:       {} x {}, t={}", rec.s, rec.probe_kind, rec.t)?;
    writeln!(out, "seed:         {}", rec.seed)?;
    writeln!(out, "estimate:     {:.16e}", rec.estimate)?;
    if let (Some(exact), Some(err)) = (rec.exact, rec.abs_error) {
        writeln!(out, "exact:        {exact:.16e}")?;
        writeln!(out, "abs_error:    {err:.6e}")?;
    }
    writeln!(out, "wall_time_ms: {:.3}", rec.wall_time_ms)
}

fn logdet(args: &LogdetArgs) -> anyhow::Result<ExitCode> {
    let rec = run_single(&args.problem.run_config(args.algorithm));
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match args.format {
        Format::Csv => write_csv(std::slice::from_ref(&rec), &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &rec)?;
            writeln!(out)?;
        }
        Format::Plain => print_plain(&rec, &mut out)?,
    }
    if let Some(e) = &rec.error {
        eprintln!("error: {e}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &BenchArgs) -> anyhow::Result<ExitCode> {
    let spec = SweepSpec {
        param: args.sweep,
        values: args.values.clone(),
        base: args.problem.run_config(Algorithm::R3),
        algorithms: args.algorithms.clone(),
        trials: args.trials,
        seed_base: args.problem.seed,
    };
    spec.validate()?;
    let json = args.out.extension().is_some_and(|e| e == "json");
    let mut failures = 0usize;
    let records = if json {
        run_sweep(&spec, args.jobs as usize, |r| {
            failures += usize::from(r.error.is_some());
            Ok(())
        })?
    } else {
        let mut sink = CsvSink::create(&args.out)?;
        run_sweep(&spec, args.jobs as usize, |r| {
            failures += usize::from(r.error.is_some());
            sink.write(r)
        })?
    };
    if json {
        emit_json(&records, &args.out)?;
    }
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    if failures > 0 {
        eprintln!("{failures} record(s) carry an error");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Logdet(args) => logdet(&args).context("logdet failed"),
        Command::Bench(args) => bench(&args).context("bench failed"),
        Command::Verify(args) => {
            let report = verify(args.tolerance);
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
