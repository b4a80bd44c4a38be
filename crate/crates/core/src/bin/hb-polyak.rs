use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hb_polyak::harness::{
    self, parse_methods, ExperimentConfig, SpectrumChoice, EXIT_DEGENERATE, EXIT_USAGE,
};
use hb_polyak::Error;

/// Adaptive Heavy-ball with Polyak step-sizes on random convex quadratics.
#[derive(Debug, Parser)]
#[command(name = "hb-polyak", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a method ensemble and write one CSV row per (method, iteration).
    Run(Common),
    /// Check the adaptive method, the Q-minimizing family and CG against the
    /// Krylov oracle and report the invariants as JSON.
    Verify(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Problem dimension.
    #[arg(long, default_value_t = 25)]
    dim: usize,
    /// Condition number L/μ (μ = 1).
    #[arg(long, default_value_t = 10.0)]
    cond: f64,
    /// Eigenvalue layout: geometric, uniform or file:<path>.
    #[arg(long, default_value = "geometric")]
    spectrum: SpectrumChoice,
    /// Seed for the rotation, the minimizer draw and the starting point.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of iterations T.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// `all` or a comma-separated list, e.g. `hb-polyak,cg,qmin:X^2`.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Absolute gradient-norm stopping threshold (default 1e-13·‖∇f(x₀)‖).
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Output path (CSV for `run`, JSON for `verify`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write semi-log SVG plots next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Optimal value f⋆ of the generated problem.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    fstar: f64,
}

impl Common {
    fn into_config(self) -> hb_polyak::Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            dim: self.dim,
            condition_number: self.cond,
            spectrum: self.spectrum,
            seed: self.seed,
            iters: self.iters,
            methods: parse_methods(&self.methods)?,
            grad_tol: self.grad_tol,
            out: self.out,
            plot: self.plot,
            f_star: self.fstar,
        })
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e.root() {
        Error::Validation(_) | Error::DimensionMismatch { .. } | Error::InvalidQ { .. } => {
            EXIT_USAGE
        }
        _ if e.is_numerical_degeneracy() => EXIT_DEGENERATE,
        _ => 1,
    }
}

fn execute(command: Command) -> hb_polyak::Result<i32> {
    let stdout = std::io::stdout().lock();
    match command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let outcome = harness::cmd_run(&cfg, stdout)?;
            for run in &outcome.runs {
                if let Some(e) = &run.error {
                    eprintln!("{}: {e}", run.method);
                }
            }
            for plot in &outcome.plots {
                eprintln!("wrote {}", plot.display());
            }
            Ok(outcome.exit_code)
        }
        Command::Verify(args) => {
            let cfg = args.into_config()?;
            let report = harness::verify(&cfg)?;
            harness::write_report(cfg.out.as_deref(), &report, stdout)?;
            for c in report.violations() {
                eprintln!(
                    "violation: {} [{}] t={} value={:e} tol={:e}",
                    c.name, c.method, c.t, c.value, c.tol
                );
            }
            eprintln!("{}", if report.pass { "PASS" } else { "FAIL" });
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
