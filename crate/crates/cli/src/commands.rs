use std::io::{ErrorKind, Write};
use std::path::Path;

use serde::Serialize;

use l1cert::certify::{self, AssumptionReport, ConditionReport, DualCertificate, ProblemInstance, SupportPattern, Verdict};
use l1cert::compare::{self, ImplicationReport};
use l1cert::constants::{self, RobustnessConstants};
use l1cert::generate::{self, GenerateOptions};
use l1cert::io::{self, InstanceFile};
use l1cert::linalg;
use l1cert::solvers::{self, SolveResult};
use l1cert::sweep::{self, SweepOptions};
use l1cert::Error;

use crate::{Command, Model, XFrom};

pub const EXIT_NOT_UNIQUE: u8 = 1;
pub const EXIT_MARGINAL: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_IO: u8 = 4;
pub const EXIT_PARSE: u8 = 5;
pub const EXIT_HYPOTHESIS: u8 = 6;
pub const EXIT_NUMERICAL: u8 = 7;
pub const EXIT_VIOLATION: u8 = 8;

pub const SEED_ENV: &str = "L1CERT_SEED";
const DEFAULT_SEED: u64 = 0;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Parse { .. } => EXIT_PARSE,
            Error::InvalidInput(_) | Error::DimensionMismatch(_) => EXIT_USAGE,
            Error::HypothesisNotMet(_) | Error::AssumptionViolation(_) => EXIT_HYPOTHESIS,
            _ => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load(path: &Path) -> CliResult<(InstanceFile, ProblemInstance)> {
    let file = InstanceFile::load(path)?;
    let inst = file.to_instance()?;
    Ok((file, inst))
}

/// Writes to stdout; a closed pipe on the reader's side is not an error.
fn emit(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Error::Io(format!("stdout: {e}")).into()),
        _ => Ok(()),
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    emit(&(io::to_json(value)? + "\n"))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())).into()),
        None => emit(text),
    }
}

/// `--seed`, then `L1CERT_SEED`, then the default.
fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[derive(Serialize)]
struct Reference {
    source: &'static str,
    x_bar: Vec<f64>,
}

fn reference_point(inst: &ProblemInstance, x_from: Option<XFrom>) -> CliResult<Reference> {
    let from = x_from.unwrap_or(if inst.x_star.is_some() { XFrom::File } else { XFrom::Solve });
    match from {
        XFrom::File => {
            let x = inst
                .x_star
                .clone()
                .ok_or_else(|| CliError::usage("--x-from file needs x_star in the instance"))?;
            let r = linalg::norm2(&linalg::sub(&inst.phi.mul_vec(&x)?, &inst.b));
            if r > 1e-8 * (1.0 + linalg::norm2(&inst.b)) {
                eprintln!("warning: x_star misses Φx = b by {r:e}");
            }
            Ok(Reference { source: "file", x_bar: x })
        }
        XFrom::Solve => {
            let sol = solvers::solve_bp(&inst.phi, &inst.psi, &inst.b)?;
            Ok(Reference {
                source: "solve",
                x_bar: sol.x,
            })
        }
    }
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Unique => 0,
        Verdict::NotUnique => EXIT_NOT_UNIQUE,
        Verdict::Marginal => EXIT_MARGINAL,
    }
}

#[derive(Serialize)]
struct CheckOutput {
    reference: Reference,
    assumptions: AssumptionReport,
    #[serde(flatten)]
    report: ConditionReport,
}

#[derive(Serialize)]
struct ConstantsOutput {
    reference: Reference,
    pattern: SupportPattern,
    certificate: DualCertificate,
    constants: RobustnessConstants,
}

#[derive(Serialize)]
struct CompareOutput {
    reference: Reference,
    #[serde(flatten)]
    report: ImplicationReport,
}

pub fn run(cmd: Command) -> CliResult<u8> {
    match cmd {
        Command::Check { instance, point, tol } => {
            let tol = tol.resolve();
            let (_, inst) = load(&instance)?;
            let reference = reference_point(&inst, point.x_from)?;
            let report = certify::verify_condition1(&inst, &reference.x_bar, &tol)?;
            let assumptions = certify::check_assumptions(&inst.phi, &inst.psi, &tol)?;
            let code = verdict_code(report.verdict);
            print_json(&CheckOutput {
                reference,
                assumptions,
                report,
            })?;
            Ok(code)
        }
        Command::Constants { instance, c0, point, tol } => {
            let tol = tol.resolve();
            let (_, inst) = load(&instance)?;
            let reference = reference_point(&inst, point.x_from)?;
            let report = certify::verify_condition1(&inst, &reference.x_bar, &tol)?;
            let certificate = match (report.verdict, report.certificate) {
                (Verdict::Unique, Some(c)) => c,
                (verdict, _) => {
                    return Err(Error::HypothesisNotMet(format!(
                        "the robustness bounds need a strict dual certificate at the reference point \
                         (kernel condition plus ‖y_J‖∞ < 1); the certificate test returned {verdict:?}"
                    ))
                    .into())
                }
            };
            let constants = constants::robustness_constants(&inst.phi, &inst.psi, &certificate, &report.pattern, c0, &tol)?;
            print_json(&ConstantsOutput {
                reference,
                pattern: report.pattern,
                certificate,
                constants,
            })?;
            Ok(0)
        }
        Command::Solve {
            instance,
            model,
            lambda,
            delta,
        } => {
            let (_, inst) = load(&instance)?;
            let result: SolveResult = match model {
                Model::Bp => solvers::solve_bp(&inst.phi, &inst.psi, &inst.b)?,
                Model::Lasso => {
                    let lambda = lambda
                        .or(inst.lambda)
                        .ok_or_else(|| CliError::usage("the lasso needs --lambda or a lambda in the instance"))?;
                    solvers::solve_lasso(&inst.phi, &inst.psi, &inst.b, lambda)?
                }
                Model::Bpdn => {
                    let delta = delta
                        .or(inst.delta)
                        .ok_or_else(|| CliError::usage("BPDN needs --delta or a delta in the instance"))?;
                    solvers::solve_bpdn(&inst.phi, &inst.psi, &inst.b, delta)?
                }
            };
            print_json(&result)?;
            Ok(if result.converged { 0 } else { EXIT_NUMERICAL })
        }
        Command::Compare { instance, point, tol } => {
            let tol = tol.resolve();
            let (_, inst) = load(&instance)?;
            let reference = reference_point(&inst, point.x_from)?;
            let report = compare::implication_tests(&inst, &reference.x_bar, &tol)?;
            let code = if report.violations.is_empty() { 0 } else { EXIT_VIOLATION };
            for v in &report.violations {
                eprintln!("violation: {v}");
            }
            print_json(&CompareOutput { reference, report })?;
            Ok(code)
        }
        Command::Sweep {
            instance,
            noise_draws,
            delta_grid,
            seed,
            c0,
            support_size,
            out,
            tol,
        } => {
            let seed = resolve_seed(seed)?;
            let (_, inst) = load(&instance)?;
            let opts = SweepOptions {
                noise_draws,
                deltas: delta_grid,
                seed,
                c0,
                support_size,
                tol: tol.resolve(),
            };
            let report = sweep::run_sweep(&inst, &opts)?;
            let failed = report.records.iter().filter(|r| r.error.is_some()).count();
            let violated = report.records.iter().filter(|r| r.error.is_none() && !r.satisfied).count();
            write_output(out.as_deref(), &sweep::to_csv(&report.records))?;
            eprintln!(
                "{} rows, {} bound violations, {} solver failures",
                report.records.len(),
                violated,
                failed
            );
            Ok(0)
        }
        Command::Generate {
            m,
            n,
            l,
            sparsity,
            psi,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed)?;
            let file = generate::generate(&GenerateOptions {
                m,
                n,
                l: l.unwrap_or(n),
                sparsity,
                psi: psi.into(),
                seed,
            })?;
            write_output(out.as_deref(), &file.to_json())?;
            Ok(0)
        }
    }
}
