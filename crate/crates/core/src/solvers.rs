//! Desk-scale solvers for the three recovery programs and a brute-force
//! uniqueness oracle.
//!
//! * basis pursuit `min ‖Ψᵀx‖₁ s.t. Φx = b`, solved exactly as an LP
//! * analysis lasso `min ‖Φx − b‖₂² + λ‖Ψᵀx‖₁`, by ADMM followed by an exact
//!   solve on the sign pattern the iterates settle on
//! * BPDN `min ‖Ψᵀx‖₁ s.t. ‖Φx − b‖₂ ≤ δ`, by finding the lasso penalty whose
//!   residual norm equals `δ`
//!
//! Lasso solutions are affine in `λ` on a fixed sign pattern, which makes
//! the penalty search for BPDN a short piecewise root-finding problem.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::check_finite;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::lp::{self, LinearProgram, LpOptions, LpStatus, Relation, SimplexOptions};

pub const SOLVER_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-8;
/// Face diameters in `(oracle_tol, AMBIGUITY_MARGIN]` are too small to call.
pub const AMBIGUITY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lp: LpOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: SOLVER_TOL,
            max_iter: 50_000,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalty at which a BPDN solution was obtained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Basis pursuit dual pair `(y, β)` with `Ψy = Φᵀβ`, `‖y‖∞ ≤ 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_beta: Option<Vec<f64>>,
}

fn check_problem(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64]) -> Result<()> {
    if psi.nrows() != phi.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Ψ has {} rows but Φ has {} columns",
            psi.nrows(),
            phi.ncols()
        )));
    }
    if b.len() != phi.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "b has length {} but Φ has {} rows",
            b.len(),
            phi.nrows()
        )));
    }
    check_finite("Φ", &phi.row_major())?;
    check_finite("Ψ", &psi.row_major())?;
    check_finite("b", b)
}

fn residual(phi: &DenseMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let r = phi.mul_vec(x).expect("dimensions checked");
    linalg::sub(&r, b)
}

/// `‖Ψᵀx‖₁`
pub fn analysis_l1(psi: &DenseMatrix, x: &[f64]) -> f64 {
    linalg::norm1(&psi.tr_mul_vec(x).expect("dimensions checked"))
}

/// `‖Φx − b‖₂² + λ‖Ψᵀx‖₁`
pub fn lasso_objective(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let r = linalg::norm2(&residual(phi, b, x));
    r * r + lambda * analysis_l1(psi, x)
}

// ---------------------------------------------------------------------------
// Basis pursuit

/// Variables `[x (n), z⁺ (l), z⁻ (l)]`, rows `Ψᵀx − z⁺ + z⁻ = 0` then `Φx = b`.
fn bp_program(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64]) -> LinearProgram {
    let (m, n) = phi.shape();
    let l = psi.ncols();
    let mut prog = LinearProgram::new(n + 2 * l);
    for j in n..n + 2 * l {
        prog.set_bounds(j, 0.0, f64::INFINITY);
        prog.set_cost(j, 1.0);
    }
    for i in 0..l {
        let mut row = vec![0.0; n + 2 * l];
        for k in 0..n {
            row[k] = psi.get(k, i);
        }
        row[n + i] = -1.0;
        row[n + l + i] = 1.0;
        prog.add_row(row, Relation::Eq, 0.0);
    }
    for i in 0..m {
        let mut row = vec![0.0; n + 2 * l];
        row[..n].copy_from_slice(&phi.row(i));
        prog.add_row(row, Relation::Eq, b[i]);
    }
    prog
}

pub fn solve_bp(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64]) -> Result<SolveResult> {
    solve_bp_with(phi, psi, b, &SolverOptions::default())
}

pub fn solve_bp_with(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    check_problem(phi, psi, b)?;
    let n = phi.ncols();
    let l = psi.ncols();
    let out = bp_program(phi, psi, b).solve(&SimplexOptions {
        max_iter: opts.lp.max_iter,
        ..SimplexOptions::default()
    })?;
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("b is not in the range of Φ".into())),
        LpStatus::Unbounded => unreachable!("objective is bounded below by zero"),
    }
    let x = out.x[..n].to_vec();
    let y: Vec<f64> = out.row_duals[..l].iter().map(|w| -w).collect();
    let beta = out.row_duals[l..].to_vec();
    let objective = analysis_l1(psi, &x);
    let kkt = bp_kkt_residual(phi, psi, b, &x, &y, &beta)?;
    Ok(SolveResult {
        x,
        objective,
        kkt_residual: kkt,
        iterations: out.iterations,
        converged: kkt <= opts.tol,
        lambda: None,
        dual_y: Some(y),
        dual_beta: Some(beta),
    })
}

/// Largest violation among primal feasibility, `Ψy = Φᵀβ`, `‖y‖∞ ≤ 1` and
/// the relative duality gap `(‖Ψᵀx‖₁ − ⟨b, β⟩)/(1 + ‖Ψᵀx‖₁)`.
pub fn bp_kkt_residual(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    x: &[f64],
    y: &[f64],
    beta: &[f64],
) -> Result<f64> {
    let feas = linalg::norm_inf(&residual(phi, b, x));
    let stat = linalg::norm_inf(&linalg::sub(&psi.mul_vec(y)?, &phi.tr_mul_vec(beta)?));
    let dual_feas = (linalg::norm_inf(y) - 1.0).max(0.0);
    let obj = analysis_l1(psi, x);
    let gap = (obj - linalg::dot(b, beta)).abs() / (1.0 + obj);
    Ok(feas.max(stat).max(dual_feas).max(gap))
}

// ---------------------------------------------------------------------------
// Lasso

/// Sign pattern of `Ψᵀx`: indices treated as zero, and signs elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Pattern {
    signs: Vec<i8>,
}

impl Pattern {
    fn from_values(v: &[f64], threshold: f64) -> Self {
        Self {
            signs: v
                .iter()
                .map(|&t| {
                    if t.abs() <= threshold {
                        0
                    } else if t > 0.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect(),
        }
    }

    fn zero_set(&self) -> Vec<usize> {
        (0..self.signs.len()).filter(|&i| self.signs[i] == 0).collect()
    }

    fn sign_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.signs.len(), self.signs.iter().map(|&s| s as f64))
    }
}

struct Lasso<'a> {
    phi: &'a DMatrix<f64>,
    psi: &'a DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    gram2: DMatrix<f64>,
    phitb2: DVector<f64>,
    frame: DMatrix<f64>,
}

/// Exact solution on a fixed pattern as `x = x_a + λ x_b` (plus a component
/// in `Ker(Φ) ∩ Ker(Ψ_Jᵀ)` that leaves `Φx` and `Ψᵀx` unchanged).
struct PatternPath {
    pattern: Pattern,
    x_a: DVector<f64>,
    x_b: DVector<f64>,
}

impl<'a> Lasso<'a> {
    fn new(phi: &'a DenseMatrix, psi: &'a DenseMatrix, b: &[f64], lambda: f64) -> Self {
        let (phi, psi) = (phi.as_na(), psi.as_na());
        let b = DVector::from_column_slice(b);
        Self {
            gram2: phi.tr_mul(phi) * 2.0,
            phitb2: phi.tr_mul(&b) * 2.0,
            frame: psi * psi.transpose(),
            phi,
            psi,
            b,
            lambda,
        }
    }

    fn n(&self) -> usize {
        self.phi.ncols()
    }

    /// Factorizes `2ΦᵀΦ + ρΨΨᵀ + εI`, with `ε > 0` only when needed.
    fn factor(&self, rho: f64) -> (Cholesky<f64, nalgebra::Dyn>, f64) {
        let m = &self.gram2 + &self.frame * rho;
        if let Some(c) = Cholesky::new(m.clone()) {
            let diag_min = c.l_dirty().diagonal().min();
            let diag_max = c.l_dirty().diagonal().max();
            if diag_min > 1e-7 * diag_max {
                return (c, 0.0);
            }
        }
        let eps = 1e-6 * (m.trace() / self.n() as f64).max(1e-12);
        let shifted = m + DMatrix::identity(self.n(), self.n()) * eps;
        (Cholesky::new(shifted).expect("shifted matrix is positive definite"), eps)
    }

    fn path(&self, pattern: &Pattern) -> PatternPath {
        let n = self.n();
        let zero = pattern.zero_set();
        let u = if zero.is_empty() {
            DMatrix::identity(n, n)
        } else {
            let psi_j_t = DenseMatrix::from_na(self.psi.select_columns(&zero).transpose());
            let tol = linalg::default_rank_tol(&psi_j_t);
            linalg::right_split(&psi_j_t, tol).kernel.as_na().clone()
        };
        if u.ncols() == 0 {
            return PatternPath {
                pattern: pattern.clone(),
                x_a: DVector::zeros(n),
                x_b: DVector::zeros(n),
            };
        }
        let h = u.tr_mul(&self.gram2) * &u;
        let h_pinv = DenseMatrix::from_na(h);
        let h_pinv = linalg::pseudo_inverse(&h_pinv, None).expect("finite matrix");
        let h_pinv = h_pinv.as_na();
        let psi_s = self.psi * pattern.sign_vector();
        PatternPath {
            pattern: pattern.clone(),
            x_a: &u * (h_pinv * u.tr_mul(&self.phitb2)),
            x_b: -(&u * (h_pinv * u.tr_mul(&psi_s))),
        }
    }

    /// Distance (in ∞-norm) of zero from the subdifferential at `x`.
    fn kkt(&self, x: &DVector<f64>, lp_opts: &LpOptions) -> f64 {
        let z = self.psi.tr_mul(x);
        let zt = 1e-10 * z.amax().max(1.0);
        let pattern = Pattern::from_values(z.as_slice(), zt);
        let g = &self.gram2 * x - &self.phitb2 + self.psi * pattern.sign_vector() * self.lambda;
        let zero = pattern.zero_set();
        if zero.is_empty() {
            return g.amax();
        }
        let psi_j = self.psi.select_columns(&zero) * self.lambda;
        let y = linalg::pseudo_inverse(&DenseMatrix::from_na(psi_j.clone()), Some(1e-13))
            .and_then(|p| p.mul_vec((-&g).as_slice()))
            .map_or_else(|_| DVector::zeros(zero.len()), DVector::from_vec);
        let clipped = y.map(|v| v.clamp(-1.0, 1.0));
        let ls = (&g + &psi_j * &clipped).amax();
        if ls <= 1e-12 * (1.0 + g.amax()) {
            return ls;
        }
        // Exact box-constrained distance: r − λΨ_J y = g.
        let n = self.n();
        let mut a = DMatrix::zeros(n, n + zero.len());
        a.view_mut((0, 0), (n, n)).fill_with_identity();
        a.view_mut((0, n), (n, zero.len())).copy_from(&(-psi_j));
        let free: Vec<usize> = (0..n).collect();
        let boxed: Vec<usize> = (n..n + zero.len()).collect();
        match lp::solve_inf_norm_box(&DenseMatrix::from_na(a), g.as_slice(), &free, &boxed, lp_opts) {
            Ok(sol) if sol.status == LpStatus::Optimal => sol.value.min(ls),
            _ => ls,
        }
    }

    /// Snaps `x_ref` onto the exact solution set of `pattern`, keeping its
    /// component in the directions the pattern leaves free.
    fn polish(&self, path: &PatternPath, x_ref: &DVector<f64>) -> DVector<f64> {
        let base = &path.x_a + &path.x_b * self.lambda;
        // Free directions: Ker(Φ) ∩ Ker(Ψ_Jᵀ) within the pattern subspace.
        let n = self.n();
        let zero = path.pattern.zero_set();
        let mut stacked = DMatrix::zeros(self.phi.nrows() + zero.len(), n);
        stacked.view_mut((0, 0), (self.phi.nrows(), n)).copy_from(self.phi);
        if !zero.is_empty() {
            stacked
                .view_mut((self.phi.nrows(), 0), (zero.len(), n))
                .copy_from(&self.psi.select_columns(&zero).transpose());
        }
        let stacked = DenseMatrix::from_na(stacked);
        let tol = linalg::default_rank_tol(&stacked);
        let free = linalg::right_split(&stacked, tol).kernel;
        if free.ncols() == 0 {
            return base;
        }
        let f = free.as_na();
        base + f * f.tr_mul(&(x_ref - &path.x_a - &path.x_b * self.lambda))
    }

    fn try_pattern(&self, pattern: &Pattern, x_ref: &DVector<f64>, opts: &SolverOptions) -> Option<(DVector<f64>, f64, PatternPath)> {
        let path = self.path(pattern);
        let x = self.polish(&path, x_ref);
        let kkt = self.kkt(&x, &opts.lp);
        (kkt <= opts.tol).then_some((x, kkt, path))
    }

    fn candidates(&self, z: &DVector<f64>, v: &DVector<f64>) -> Vec<Pattern> {
        let mut out = vec![Pattern::from_values(z.as_slice(), 0.0)];
        let scale = v.amax().max(1e-300);
        for t in [1e-6, 1e-4] {
            let p = Pattern::from_values(v.as_slice(), t * scale);
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    fn solve(&self, x0: Option<&[f64]>, warm_pattern: bool, opts: &SolverOptions) -> Result<(SolveResult, Option<PatternPath>)> {
        let n = self.n();
        let mut x = x0.map(DVector::from_column_slice).unwrap_or_else(|| DVector::zeros(n));
        if warm_pattern && x0.is_some() {
            let v = self.psi.tr_mul(&x);
            let p = Pattern::from_values(v.as_slice(), 1e-9 * v.amax().max(1e-300));
            if let Some((x, kkt, path)) = self.try_pattern(&p, &x, opts) {
                return Ok((self.result(x, kkt, 0), Some(path)));
            }
        }

        let psi = self.psi;
        let mut rho = (self.gram2.trace() / self.frame.trace().max(1e-300)).max(1e-8) * self.lambda.max(1e-3).sqrt();
        let (mut chol, mut eps) = self.factor(rho);
        let mut z = psi.tr_mul(&x);
        let mut u = DVector::zeros(z.len());
        let mut tried: Vec<Pattern> = Vec::new();
        let mut last_key: Option<Pattern> = None;
        let mut stable = 0usize;
        let mut last_attempt = 0usize;

        for k in 1..=opts.max_iter {
            let rhs = &self.phitb2 + psi * (&z - &u) * rho + &x * eps;
            x = chol.solve(&rhs);
            let v = psi.tr_mul(&x);
            let z_old = z.clone();
            let thr = self.lambda / rho;
            z = (&v + &u).map(|t| t.signum() * (t.abs() - thr).max(0.0));
            u += &v - &z;

            let key = Pattern::from_values(z.as_slice(), 0.0);
            if last_key.as_ref() == Some(&key) {
                stable += 1;
            } else {
                stable = 0;
                last_key = Some(key.clone());
            }
            let fresh = !tried.contains(&key);
            if (stable >= 5 && fresh) || k - last_attempt >= 200 {
                last_attempt = k;
                tried.push(key);
                for p in self.candidates(&z, &v) {
                    if let Some((xp, kkt, path)) = self.try_pattern(&p, &x, opts) {
                        return Ok((self.result(xp, kkt, k), Some(path)));
                    }
                }
            }

            if k % 10 == 0 {
                let r_pri = (&v - &z).norm();
                let r_dual = rho * (psi * (&z - &z_old)).norm();
                let factor = if r_pri > 10.0 * r_dual {
                    2.0
                } else if r_dual > 10.0 * r_pri {
                    0.5
                } else {
                    1.0
                };
                if factor != 1.0 {
                    rho *= factor;
                    u /= factor;
                    (chol, eps) = self.factor(rho);
                }
            }
        }
        let kkt = self.kkt(&x, &opts.lp);
        if kkt <= opts.tol {
            return Ok((self.result(x, kkt, opts.max_iter), None));
        }
        Err(Error::NotConverged {
            iterations: opts.max_iter,
            residual: kkt,
        })
    }

    fn result(&self, x: DVector<f64>, kkt: f64, iterations: usize) -> SolveResult {
        let r = self.phi * &x - &self.b;
        let objective = r.norm_squared() + self.lambda * self.psi.tr_mul(&x).lp_norm(1);
        SolveResult {
            x: x.as_slice().to_vec(),
            objective,
            kkt_residual: kkt,
            iterations,
            converged: true,
            lambda: None,
            dual_y: None,
            dual_beta: None,
        }
    }
}

pub fn solve_lasso(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], lambda: f64) -> Result<SolveResult> {
    solve_lasso_with(phi, psi, b, lambda, None, &SolverOptions::default())
}

/// Lasso from an optional starting point `x0`.
pub fn solve_lasso_with(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    lambda: f64,
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_problem(phi, psi, b)?;
    check_lambda(lambda)?;
    check_start(phi, x0)?;
    Ok(Lasso::new(phi, psi, b, lambda).solve(x0, false, opts)?.0)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_start(phi: &DenseMatrix, x0: Option<&[f64]>) -> Result<()> {
    if let Some(x) = x0 {
        if x.len() != phi.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "start has length {} but Φ has {} columns",
                x.len(),
                phi.ncols()
            )));
        }
        check_finite("x0", x)?;
    }
    Ok(())
}

/// Distance of zero from the lasso subdifferential at `x`, in the ∞-norm.
pub fn lasso_kkt_residual(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], lambda: f64, x: &[f64]) -> Result<f64> {
    check_problem(phi, psi, b)?;
    check_lambda(lambda)?;
    check_start(phi, Some(x))?;
    Ok(Lasso::new(phi, psi, b, lambda).kkt(&DVector::from_column_slice(x), &LpOptions::default()))
}

// ---------------------------------------------------------------------------
// BPDN

pub fn solve_bpdn(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], delta: f64) -> Result<SolveResult> {
    solve_bpdn_with(phi, psi, b, delta, None, &SolverOptions::default())
}

pub fn solve_bpdn_with(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    delta: f64,
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    check_problem(phi, psi, b)?;
    check_start(phi, x0)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be ≥ 0, got {delta}")));
    }
    if delta == 0.0 {
        return solve_bp_with(phi, psi, b, opts);
    }
    let b_norm = linalg::norm2(b);
    let range = linalg::range_basis(phi, None)?;
    let proj = range.mul_vec(&range.tr_mul_vec(b)?)?;
    let r_min = linalg::norm2(&linalg::sub(b, &proj));
    if r_min > delta * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "smallest residual {r_min:e} exceeds delta {delta:e}"
        )));
    }
    if b_norm <= delta {
        let n = phi.ncols();
        return Ok(SolveResult {
            x: vec![0.0; n],
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
            lambda: None,
            dual_y: None,
            dual_beta: None,
        });
    }

    let target_tol = 1e-11 * (1.0 + delta);
    // Smallest penalty for which x = 0 solves the lasso.
    let phitb = phi.tr_mul_vec(b)?;
    let mut hi = match lp::solve_inf_norm_eq(psi, &phitb, &opts.lp) {
        Ok(sol) if sol.status == LpStatus::Optimal && sol.value > 0.0 => 2.0 * sol.value,
        _ => 1.0,
    };
    let mut lo = 0.0;
    let mut iterations = 0;
    let mut warm: Option<Vec<f64>> = x0.map(|x| x.to_vec());
    let mut next = hi * 0.5;
    for _ in 0..200 {
        let lambda = next;
        let lasso = Lasso::new(phi, psi, b, lambda);
        let (sol, path) = lasso.solve(warm.as_deref(), warm.is_some(), opts)?;
        iterations += sol.iterations;
        let r = linalg::norm2(&residual(phi, b, &sol.x));
        if (r - delta).abs() <= target_tol {
            let kkt = (sol.kkt_residual / lambda).max((r - delta).abs());
            return Ok(SolveResult {
                objective: analysis_l1(psi, &sol.x),
                x: sol.x,
                kkt_residual: kkt,
                iterations,
                converged: kkt <= opts.tol,
                lambda: Some(lambda),
                dual_y: None,
                dual_beta: None,
            });
        }
        if r < delta {
            lo = lambda;
        } else {
            hi = lambda;
        }
        // The residual can only cross δ on a piece where the solution is
        // affine; this jumps straight to the crossing if it lies on the
        // current piece.
        let analytic = path.and_then(|p| affine_crossing(phi, b, &p, delta, lo, hi));
        next = match analytic {
            Some(l) if l != lambda => l,
            _ if lo == 0.0 => hi * 0.25,
            _ => (lo * hi).sqrt(),
        };
        warm = Some(sol.x);
    }
    Err(Error::NotConverged {
        iterations,
        residual: f64::NAN,
    })
}

/// Penalty in `(lo, hi)` where `‖Φ(x_a + λx_b) − b‖₂ = δ`.
fn affine_crossing(phi: &DenseMatrix, b: &[f64], path: &PatternPath, delta: f64, lo: f64, hi: f64) -> Option<f64> {
    let p = residual(phi, b, path.x_a.as_slice());
    let q = phi.mul_vec(path.x_b.as_slice()).ok()?;
    let (qq, pq, pp) = (linalg::dot(&q, &q), linalg::dot(&p, &q), linalg::dot(&p, &p));
    if qq <= 0.0 {
        return None;
    }
    let disc = pq * pq - qq * (pp - delta * delta);
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    [(-pq + sq) / qq, (-pq - sq) / qq]
        .into_iter()
        .find(|&l| l > lo && l < hi)
}

// ---------------------------------------------------------------------------
// Uniqueness oracle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub unique: bool,
    pub optimal_value: f64,
    /// Two distinct minimizers, present whenever `unique` is false.
    pub witness_pair: Option<(Vec<f64>, Vec<f64>)>,
    /// Largest coordinate range over the optimal set.
    pub face_diameter: f64,
    /// The diameter is above `oracle_tol` but at most [`AMBIGUITY_MARGIN`].
    pub ambiguous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub oracle_tol: f64,
    /// Initial relative slack on the optimal value; widened only if the
    /// optimal set comes out empty.
    pub slack: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            oracle_tol: ORACLE_TOL,
            slack: 1e-12,
        }
    }
}

pub fn uniqueness_oracle(phi: &DenseMatrix, psi: &DenseMatrix, b: &[f64], optimal_value: f64) -> Result<UniquenessVerdict> {
    uniqueness_oracle_with(phi, psi, b, optimal_value, &OracleOptions::default())
}

/// Ranges every coordinate over `{x : Φx = b, ‖Ψᵀx‖₁ ≤ v*}`.
pub fn uniqueness_oracle_with(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    optimal_value: f64,
    opts: &OracleOptions,
) -> Result<UniquenessVerdict> {
    check_problem(phi, psi, b)?;
    if !(optimal_value.is_finite() && optimal_value >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "optimal value must be finite and ≥ 0, got {optimal_value}"
        )));
    }
    let n = phi.ncols();
    let l = psi.ncols();
    let simplex = SimplexOptions {
        feas_tol: 1e-11,
        ..SimplexOptions::default()
    };
    let mut slack = opts.slack;
    'widen: loop {
        let mut base = bp_program(phi, psi, b);
        let terms: Vec<(usize, f64)> = (n..n + 2 * l).map(|j| (j, 1.0)).collect();
        base.add_sparse_row(&terms, Relation::Le, optimal_value + slack * (1.0 + optimal_value));
        for j in n..n + 2 * l {
            base.set_cost(j, 0.0);
        }
        let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        for i in 0..n {
            let mut ends = Vec::with_capacity(2);
            for dir in [1.0, -1.0] {
                let mut prog = base.clone();
                prog.set_cost(i, dir);
                let out = prog.solve(&simplex)?;
                match out.status {
                    LpStatus::Optimal => ends.push(out.x[..n].to_vec()),
                    LpStatus::Infeasible if slack < 1e-6 => {
                        slack *= 100.0;
                        continue 'widen;
                    }
                    LpStatus::Infeasible => {
                        return Err(Error::Infeasible("optimal set is empty; optimal value too small".into()))
                    }
                    LpStatus::Unbounded => {
                        return Err(Error::Unbounded("optimal set is unbounded".into()))
                    }
                }
            }
            let (lo, hi) = (ends.remove(0), ends.remove(0));
            let spread = hi[i] - lo[i];
            if best.as_ref().map_or(true, |(s, _, _)| spread > *s) {
                best = Some((spread, lo, hi));
            }
        }
        let (diameter, lo, hi) = best.unwrap_or((0.0, vec![], vec![]));
        let diameter = diameter.max(0.0);
        let unique = diameter <= opts.oracle_tol;
        return Ok(UniquenessVerdict {
            unique,
            optimal_value,
            witness_pair: (!unique).then_some((lo, hi)),
            face_diameter: diameter,
            ambiguous: !unique && diameter <= AMBIGUITY_MARGIN,
        });
    }
}

// ---------------------------------------------------------------------------
// Multi-start probe

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoisyModel {
    Lasso { lambda: f64 },
    Bpdn { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Largest ∞-norm difference of `Φx − b` between two starts.
    pub max_residual_spread: f64,
    /// Largest difference of `‖Ψᵀx‖₁` between two starts.
    pub max_objective_spread: f64,
    /// Largest ∞-norm difference of the solutions themselves.
    pub max_solution_spread: f64,
    pub solutions: Vec<Vec<f64>>,
}

/// Solves the same noisy program from `n_starts` random starting points
/// drawn from `seed`.
pub fn solution_set_probe(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    model: NoisyModel,
    n_starts: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if n_starts < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 starts, got {n_starts}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..n_starts).map(|_| rand::Rng::random(&mut rng)).collect();
    solution_set_probe_seeded(phi, psi, b, model, &seeds)
}

/// As [`solution_set_probe`], with one explicit seed per start.
pub fn solution_set_probe_seeded(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    b: &[f64],
    model: NoisyModel,
    start_seeds: &[u64],
) -> Result<ProbeReport> {
    check_problem(phi, psi, b)?;
    let n = phi.ncols();
    let scale = (1.0 + linalg::norm2(b)) / (n as f64).sqrt();
    let opts = SolverOptions::default();
    let solutions: Vec<Vec<f64>> = start_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let x0: Vec<f64> = (0..n)
                .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let sol = match model {
                NoisyModel::Lasso { lambda } => solve_lasso_with(phi, psi, b, lambda, Some(&x0), &opts)?,
                NoisyModel::Bpdn { delta } => solve_bpdn_with(phi, psi, b, delta, Some(&x0), &opts)?,
            };
            Ok(sol.x)
        })
        .collect::<Result<_>>()?;
    let residuals: Vec<Vec<f64>> = solutions.iter().map(|x| residual(phi, b, x)).collect();
    let objectives: Vec<f64> = solutions.iter().map(|x| analysis_l1(psi, x)).collect();
    let mut report = ProbeReport {
        max_residual_spread: 0.0,
        max_objective_spread: 0.0,
        max_solution_spread: 0.0,
        solutions: Vec::new(),
    };
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            report.max_residual_spread = report
                .max_residual_spread
                .max(linalg::norm_inf(&linalg::sub(&residuals[i], &residuals[j])));
            report.max_objective_spread = report.max_objective_spread.max((objectives[i] - objectives[j]).abs());
            report.max_solution_spread = report
                .max_solution_spread
                .max(linalg::norm_inf(&linalg::sub(&solutions[i], &solutions[j])));
        }
    }
    report.solutions = solutions;
    Ok(report)
}
