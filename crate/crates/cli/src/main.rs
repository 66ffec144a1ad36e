//! `l1cert`: uniqueness certificates, robustness constants and noise sweeps
//! for ℓ1-analysis recovery problems stored as JSON instance files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use l1cert::certify::Tolerances;
use l1cert::generate::PsiKind;

#[derive(Debug, Parser)]
#[command(name = "l1cert", version, about = "Dual-certificate checks for l1 recovery problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether the reference point is the unique basis pursuit solution.
    Check {
        instance: PathBuf,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Compute the robustness constants from a strict certificate.
    Constants {
        instance: PathBuf,
        /// Ratio λ/δ for the penalized program (default: the minimizer of C1).
        #[arg(long = "C0")]
        c0: Option<f64>,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Solve one of the recovery programs.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Penalty for the lasso (overrides the instance value).
        #[arg(long)]
        lambda: Option<f64>,
        /// Noise level for BPDN (overrides the instance value).
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Evaluate the competing sufficient conditions and their implications.
    Compare {
        instance: PathBuf,
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Check the error bounds over random noise draws; writes CSV.
    Sweep {
        instance: PathBuf,
        #[arg(long, default_value_t = 50)]
        noise_draws: usize,
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
        delta_grid: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "C0")]
        c0: Option<f64>,
        /// Also check the approximately-sparse bound with this many top entries.
        #[arg(long)]
        support_size: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Write a seeded random instance.
    Generate {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Number of analysis atoms (default: n).
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        sparsity: usize,
        #[arg(long, value_enum, default_value_t = PsiArg::Identity)]
        psi: PsiArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Bp,
    Lasso,
    Bpdn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PsiArg {
    Identity,
    TightFrame,
    Random,
}

impl From<PsiArg> for PsiKind {
    fn from(p: PsiArg) -> Self {
        match p {
            PsiArg::Identity => PsiKind::Identity,
            PsiArg::TightFrame => PsiKind::TightFrame,
            PsiArg::Random => PsiKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum XFrom {
    /// Use `x_star` from the instance file.
    File,
    /// Solve basis pursuit and use its solution.
    Solve,
}

#[derive(Debug, Args)]
struct PointArgs {
    /// Where the reference point comes from (default: the file when it has
    /// x_star, otherwise a basis pursuit solve).
    #[arg(long, value_enum)]
    x_from: Option<XFrom>,
}

#[derive(Debug, Args)]
struct TolArgs {
    /// Relative singular-value cutoff for ranks and kernels.
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    kernel_tol: Option<f64>,
    #[arg(long)]
    supp_tol: Option<f64>,
    #[arg(long)]
    strict_tol: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            rank_tol: self.rank_tol.or(d.rank_tol),
            kernel_tol: self.kernel_tol.unwrap_or(d.kernel_tol),
            supp_tol: self.supp_tol.unwrap_or(d.supp_tol),
            strict_tol: self.strict_tol.unwrap_or(d.strict_tol),
            lp: d.lp,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_USAGE } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
