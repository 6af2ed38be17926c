//! `iht-ls`: IHT with capped Armijo extrapolation on ℓ0-regularized least
//! squares.
//!
//! Exit codes: 0 success with every check passing, 1 a check or trace
//! integrity failure, 2 usage or IO error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iht_linesearch::error::Error;
use iht_linesearch::harness::{
    cmd_compare, cmd_run, cmd_verify, write_compare, write_instance, write_json, write_run,
    InstanceSource, RunConfig,
};
use iht_linesearch::instance::{generate_instance, InstanceSpec};
use iht_linesearch::linalg::{load_matrix, load_vector};
use iht_linesearch::trace_io::read_trace;
use iht_linesearch::{LineSearchParams, StopCriteria};

#[derive(Parser)]
#[command(name = "iht-ls", version)]
#[command(about = "Iterative hard thresholding with capped Armijo extrapolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance and write A.csv, b.csv, x_star.csv
    Gen {
        #[command(flatten)]
        instance: InstanceArgs,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run IHT with line search; writes trace.csv, verify.json, x.csv
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run plain IHT; same outputs as `run`
    RunPlain {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run both from x0 = 0; writes both traces, compare.csv and summary.json
    Compare {
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a trace CSV against its instance and configuration
    Verify {
        /// Trace CSV produced by `run` or `run-plain`
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        instance: InstanceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Verification JSON path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Matrix CSV; requires --rhs
    #[arg(long, requires = "rhs")]
    matrix: Option<PathBuf>,
    /// Right-hand side CSV (single column)
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    rows: usize,
    #[arg(long, default_value_t = 64)]
    cols: usize,
    #[arg(long, default_value_t = 4)]
    sparsity: usize,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl InstanceArgs {
    fn spec(&self) -> InstanceSpec {
        InstanceSpec {
            rows: self.rows,
            cols: self.cols,
            sparsity: self.sparsity,
            noise_sigma: self.noise,
            seed: self.seed,
        }
    }

    fn source(&self) -> Result<InstanceSource, Error> {
        match (&self.matrix, &self.rhs) {
            (Some(m), Some(r)) => Ok(InstanceSource::Files {
                a: load_matrix(m)?,
                b: load_vector(r)?,
            }),
            _ => Ok(InstanceSource::Generated(self.spec())),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Regularization weight
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    lambda: f64,
    /// h = h_factor * ||A||_2^2
    #[arg(long, default_value_t = 1.01)]
    h_factor: f64,
    /// Absolute h, overriding --h-factor
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Cap M on the Armijo exponent
    #[arg(long, default_value_t = 20)]
    cap_m: u32,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    d_tol: f64,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long, default_value_t = 1e12)]
    bound_guard: f64,
    /// Entries with |x_i| <= zero_tol count as zero
    #[arg(long, default_value_t = 0.0)]
    zero_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut stop = StopCriteria::new(self.max_iters, self.d_tol)?.with_bound_guard(self.bound_guard)?;
        if let Some(tol) = self.residual_tol {
            stop = stop.with_residual_tol(tol)?;
        }
        let cfg = RunConfig {
            lambda: self.lambda,
            h_factor: self.h_factor,
            h: self.h,
            zero_tol: self.zero_tol,
            params: LineSearchParams::new(self.alpha, self.eta, self.cap_m)?,
            stop,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Gen { instance, out } => {
            let inst = generate_instance(&instance.spec())?;
            write_instance(&out, &inst.a, &inst.b, Some(&inst.x_star))?;
            println!("wrote instance to {}", out.display());
            Ok(0)
        }
        Command::Run {
            instance,
            solver,
            out,
        } => run_cmd(&instance, &solver, &out, false),
        Command::RunPlain {
            instance,
            solver,
            out,
        } => run_cmd(&instance, &solver, &out, true),
        Command::Compare {
            instance,
            solver,
            out,
        } => {
            let cfg = solver.config()?;
            let outcome = cmd_compare(&instance.source()?, &cfg)?;
            write_compare(&out, &outcome)?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            let code = outcome
                .plain
                .report
                .exit_code()
                .max(outcome.line_search.report.exit_code());
            Ok(code)
        }
        Command::Verify {
            trace,
            instance,
            solver,
            out,
        } => {
            let cfg = solver.config()?;
            let records = read_trace(std::fs::File::open(&trace)?)?;
            let report = cmd_verify(records, &instance.source()?, &cfg)?;
            match out {
                Some(path) => write_json(&path, &report.to_json())?,
                None => println!("{}", serde_json::to_string_pretty(&report.to_json())?),
            }
            eprint!("{}", report.human());
            Ok(report.exit_code())
        }
    }
}

fn run_cmd(
    instance: &InstanceArgs,
    solver: &SolverArgs,
    out: &std::path::Path,
    plain: bool,
) -> Result<i32, Error> {
    let cfg = solver.config()?;
    let outcome = cmd_run(&instance.source()?, &cfg, plain)?;
    write_run(out, "", &outcome)?;
    let t = &outcome.trace;
    println!(
        "{} iterations, stop {}, final phi {:.12e}, support {}",
        t.records.len(),
        t.stop_reason,
        t.final_phi,
        t.supports.last().map_or(0, Vec::len)
    );
    print!("{}", outcome.report.human());
    Ok(outcome.report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e @ Error::Integrity { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
