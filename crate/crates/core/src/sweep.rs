//! Noise sweeps comparing recovery errors with the robustness bounds.
//!
//! Each draw perturbs `b = Φx*` by noise of norm exactly `δ` (uniform on the
//! sphere), solves the noisy programs and records the error next to its
//! bound. Rows checking the exact-sparsity bounds run on `Ψ` rescaled to
//! `σ_max(Ψ) = 1` when the constants required it; rows for approximately
//! sparse signals use `Ψ` as given.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    check_kernel_condition, extract_support, find_certificate, top_support, DualCertificate, ProblemInstance,
    SupportPattern, Tolerances,
};
use crate::constants::{self, RhoTau, RobustnessConstants};
use crate::error::{Error, Result};
use crate::io::format_g17;
use crate::linalg::{self, DenseMatrix};
use crate::solvers::{self, SolverOptions, SOLVER_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepModel {
    /// Penalized program with `λ = C₀δ`, bound `C₁δ` on the ℓ₁ error.
    Lasso,
    /// Constrained program, bound `C₂δ` on the ℓ₁ error.
    Bpdn,
    /// Constrained program, ℓ₂ error bound for approximately sparse `x*`.
    BpdnThm3,
}

impl fmt::Display for SweepModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepModel::Lasso => "lasso",
            SweepModel::Bpdn => "bpdn",
            SweepModel::BpdnThm3 => "bpdn-thm3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub noise_draws: usize,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub c0: Option<f64>,
    /// `|I|` for the approximately-sparse rows; `None` skips them.
    pub support_size: Option<usize>,
    pub tol: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub seed: u64,
    pub model: SweepModel,
    pub delta: f64,
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub iters: usize,
    pub x: Vec<f64>,
    /// Noisy data the row was solved with.
    pub b: Vec<f64>,
    pub error: Option<String>,
}

/// Certificate data behind the exact-sparsity rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Setup {
    pub pattern: SupportPattern,
    pub certificate: DualCertificate,
    pub constants: RobustnessConstants,
    /// `Ψ` the rows were solved with (rescaled when needed).
    pub psi: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm3Setup {
    pub pattern: SupportPattern,
    pub certificate: DualCertificate,
    pub rho_tau: RhoTau,
    pub tail_l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub thm2: Option<Thm2Setup>,
    pub thm3: Option<Thm3Setup>,
    pub records: Vec<SweepRecord>,
}

pub const CSV_HEADER: &str = "seed,model,delta,lambda,lhs,bound,satisfied,iters";

impl SweepRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.model,
            format_g17(self.delta),
            self.lambda.map(format_g17).unwrap_or_default(),
            format_g17(self.lhs),
            format_g17(self.bound),
            self.satisfied,
            self.iters
        )
    }
}

/// `CSV_HEADER` followed by one line per record.
pub fn to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Noise direction for a draw; every `δ` of the same draw shares it.
pub fn unit_noise(seed: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = linalg::norm2(&v);
        if nrm > 0.0 {
            return v.into_iter().map(|t| t / nrm).collect();
        }
    }
}

fn thm2_setup(inst: &ProblemInstance, x_star: &[f64], opts: &SweepOptions) -> Result<Thm2Setup> {
    let tol = &opts.tol;
    let pattern = extract_support(&inst.psi, x_star, tol.supp_tol)?;
    if !check_kernel_condition(&inst.phi, &inst.psi, &pattern.cosupport, tol)?.ok {
        return Err(Error::HypothesisNotMet("x* fails the kernel condition".into()));
    }
    let certificate = find_certificate(&inst.phi, &inst.psi, &pattern, tol)?
        .certificate()
        .cloned()
        .ok_or_else(|| Error::HypothesisNotMet("x* admits no strict dual certificate".into()))?;
    let constants = constants::robustness_constants(&inst.phi, &inst.psi, &certificate, &pattern, opts.c0, tol)?;
    let psi = if constants.psi_rescaled {
        inst.psi.scale(constants.psi_scale)
    } else {
        inst.psi.clone()
    };
    Ok(Thm2Setup {
        pattern,
        certificate,
        constants,
        psi,
    })
}

fn thm3_setup(inst: &ProblemInstance, x_star: &[f64], k: usize, tol: &Tolerances) -> Result<Thm3Setup> {
    let pattern = top_support(&inst.psi, x_star, k)?;
    if pattern.cosupport.is_empty() {
        return Err(Error::InvalidInput("support size must leave a nonempty cosupport".into()));
    }
    if !check_kernel_condition(&inst.phi, &inst.psi, &pattern.cosupport, tol)?.ok {
        return Err(Error::HypothesisNotMet("the top entries fail the kernel condition".into()));
    }
    let certificate = find_certificate(&inst.phi, &inst.psi, &pattern, tol)?
        .certificate()
        .cloned()
        .ok_or_else(|| Error::HypothesisNotMet("no strict dual certificate for the top entries".into()))?;
    let rho_tau = constants::rho_tau(&inst.phi, &inst.psi, &pattern.support, &pattern.cosupport, tol)?;
    let tail_l1 = constants::tail_l1(&inst.psi, x_star, &pattern.support)?;
    Ok(Thm3Setup {
        pattern,
        certificate,
        rho_tau,
        tail_l1,
    })
}

fn satisfied(lhs: f64, bound: f64, delta: f64) -> bool {
    let slack = if delta == 0.0 { 10.0 * SOLVER_TOL } else { 0.0 };
    lhs <= bound * (1.0 + 1e-6) + slack
}

/// Runs every draw at every `δ`. With `support_size` unset, `x*` must pass
/// the certificate test; with it set, the exact-sparsity rows are skipped
/// when `x*` does not.
pub fn run_sweep(inst: &ProblemInstance, opts: &SweepOptions) -> Result<SweepReport> {
    let x_star = inst
        .x_star
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("the sweep needs x_star in the instance".into()))?;
    if opts.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::InvalidInput("deltas must be finite and ≥ 0".into()));
    }
    let thm2 = match thm2_setup(inst, x_star, opts) {
        Ok(s) => Some(s),
        Err(e @ Error::HypothesisNotMet(_)) if opts.support_size.is_none() => return Err(e),
        Err(Error::HypothesisNotMet(_)) => None,
        Err(e) => return Err(e),
    };
    let thm3 = match opts.support_size {
        Some(k) => Some(thm3_setup(inst, x_star, k, &opts.tol)?),
        None => None,
    };

    let b0 = inst.phi.mul_vec(x_star)?;
    let tasks: Vec<(u64, usize)> = (0..opts.noise_draws as u64)
        .flat_map(|d| (0..opts.deltas.len()).map(move |i| (opts.seed.wrapping_add(d), i)))
        .collect();
    let mut records: Vec<SweepRecord> = tasks
        .par_iter()
        .flat_map_iter(|&(seed, di)| {
            let delta = opts.deltas[di];
            let w = unit_noise(seed, inst.m());
            let b: Vec<f64> = b0.iter().zip(&w).map(|(a, e)| a + delta * e).collect();
            let mut rows = Vec::new();
            if let Some(s) = &thm2 {
                if delta > 0.0 {
                    rows.push(lasso_row(inst, s, x_star, &b, seed, delta));
                }
                rows.push(bpdn_row(inst, &s.psi, x_star, &b, seed, delta, SweepModel::Bpdn, |_| {
                    s.constants.c2 * delta
                }));
            }
            if let Some(s) = &thm3 {
                let bound = constants::relaxed_thm3_bound(
                    0.0,
                    s.rho_tau.rho,
                    s.rho_tau.tau,
                    s.certificate.y_j_inf(),
                    s.certificate.beta_norm(),
                    s.tail_l1,
                    delta,
                )
                .expect("strict certificate");
                rows.push(bpdn_row(inst, &inst.psi, x_star, &b, seed, delta, SweepModel::BpdnThm3, |_| bound));
            }
            rows
        })
        .collect();
    records.sort_by(|a, b| {
        (a.seed, a.delta, a.model)
            .partial_cmp(&(b.seed, b.delta, b.model))
            .expect("finite deltas")
    });
    Ok(SweepReport { thm2, thm3, records })
}

fn failed_row(seed: u64, model: SweepModel, delta: f64, lambda: Option<f64>, b: &[f64], e: Error) -> SweepRecord {
    SweepRecord {
        seed,
        model,
        delta,
        lambda,
        lhs: f64::NAN,
        bound: f64::NAN,
        satisfied: false,
        iters: 0,
        x: Vec::new(),
        b: b.to_vec(),
        error: Some(e.to_string()),
    }
}

fn lasso_row(inst: &ProblemInstance, s: &Thm2Setup, x_star: &[f64], b: &[f64], seed: u64, delta: f64) -> SweepRecord {
    let lambda = s.constants.c0 * delta;
    match solvers::solve_lasso(&inst.phi, &s.psi, b, lambda) {
        Ok(sol) => {
            let lhs = linalg::norm1(&s.psi.tr_mul_vec(&linalg::sub(&sol.x, x_star)).expect("dimensions checked"));
            let bound = s.constants.c1 * delta;
            SweepRecord {
                seed,
                model: SweepModel::Lasso,
                delta,
                lambda: Some(lambda),
                lhs,
                bound,
                satisfied: satisfied(lhs, bound, delta),
                iters: sol.iterations,
                x: sol.x,
                b: b.to_vec(),
                error: None,
            }
        }
        Err(e) => failed_row(seed, SweepModel::Lasso, delta, Some(lambda), b, e),
    }
}

#[allow(clippy::too_many_arguments)]
fn bpdn_row(
    inst: &ProblemInstance,
    psi: &DenseMatrix,
    x_star: &[f64],
    b: &[f64],
    seed: u64,
    delta: f64,
    model: SweepModel,
    bound: impl Fn(f64) -> f64,
) -> SweepRecord {
    match solvers::solve_bpdn_with(&inst.phi, psi, b, delta, None, &SolverOptions::default()) {
        Ok(sol) => {
            let diff = psi.tr_mul_vec(&linalg::sub(&sol.x, x_star)).expect("dimensions checked");
            let lhs = match model {
                SweepModel::BpdnThm3 => linalg::norm2(&diff),
                _ => linalg::norm1(&diff),
            };
            let bound = bound(delta);
            SweepRecord {
                seed,
                model,
                delta,
                lambda: sol.lambda,
                lhs,
                bound,
                satisfied: satisfied(lhs, bound, delta),
                iters: sol.iterations,
                x: sol.x,
                b: b.to_vec(),
                error: None,
            }
        }
        Err(e) => failed_row(seed, model, delta, None, b, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e0() -> ProblemInstance {
        let phi = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        ProblemInstance::new(phi, DenseMatrix::identity(3), vec![2.0, 0.0])
            .unwrap()
            .with_x_star(vec![2.0, 0.0, 0.0])
            .unwrap()
    }

    fn opts(deltas: Vec<f64>) -> SweepOptions {
        SweepOptions {
            noise_draws: 50,
            deltas,
            seed: 9,
            c0: None,
            support_size: None,
            tol: Tolerances::default(),
        }
    }

    #[test]
    fn e0_rows_satisfied() {
        let rep = run_sweep(&e0(), &opts(vec![0.01, 0.1])).unwrap();
        assert_eq!(rep.records.len(), 50 * 2 * 2);
        assert!(rep.records.iter().all(|r| r.satisfied), "{:?}", rep.records.iter().find(|r| !r.satisfied));
        let c = rep.thm2.unwrap().constants;
        assert!((c.c2 - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_delta_recovers_exactly() {
        let rep = run_sweep(&e0(), &opts(vec![0.0])).unwrap();
        assert!(rep.records.iter().all(|r| r.model == SweepModel::Bpdn && r.lhs <= 10.0 * SOLVER_TOL && r.satisfied));
    }

    #[test]
    fn ordering_and_determinism() {
        let a = run_sweep(&e0(), &opts(vec![0.1, 0.01])).unwrap();
        let b = run_sweep(&e0(), &opts(vec![0.1, 0.01])).unwrap();
        assert_eq!(to_csv(&a.records), to_csv(&b.records));
        let keys: Vec<(u64, f64)> = a.records.iter().map(|r| (r.seed, r.delta)).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        assert!(to_csv(&a.records).starts_with(CSV_HEADER));
    }

    #[test]
    fn noise_has_exact_norm() {
        let w = unit_noise(4, 5);
        assert!((linalg::norm2(&w) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn requires_x_star() {
        let mut inst = e0();
        inst.x_star = None;
        assert!(run_sweep(&inst, &opts(vec![0.1])).is_err());
    }
}
