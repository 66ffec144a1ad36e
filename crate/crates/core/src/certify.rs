//! Verification of the dual-certificate uniqueness condition.
//!
//! Given `Φ`, `Ψ` and a candidate `x̄`, with `I = supp(Ψᵀx̄)` and a cosupport
//! `J ⊆ Iᶜ`, the condition asks for
//!
//! 1. `Ker(Ψ_Jᵀ) ∩ Ker(Φ) = {0}`, and
//! 2. some `y` with `Ψy ∈ Im(Φᵀ)`, `y_I = sign(Ψ_Iᵀx̄)`, `‖y_J‖∞ < 1` and
//!    `‖y_K‖∞ ≤ 1` on the remaining indices `K`.
//!
//! Part 1 is a rank test on `Ψ_JᵀQ` with `Q` an orthonormal basis of
//! `Ker(Φ)`. Part 2 holds exactly when the program
//! `min ‖u‖∞ s.t. QᵀΨ_J u = −QᵀΨ_I sign(Ψ_Iᵀx̄)` has value below one.
//! Both parts together are equivalent to `x̄` being the unique minimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm_inf, DenseMatrix};
use crate::lp::{self, LpOptions, LpStatus};

/// Numerical thresholds shared by the verification routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative rank tolerance for kernel bases of input matrices; `None`
    /// selects `max(rows, cols) · ε`.
    pub rank_tol: Option<f64>,
    /// `Ψ_JᵀQ` is rank deficient when a singular value is at most
    /// `kernel_tol · ‖Ψ‖`.
    pub kernel_tol: f64,
    /// Entries of `Ψᵀx` at most `supp_tol · ‖Ψᵀx‖∞` in magnitude are zero.
    pub supp_tol: f64,
    /// Margin used to decide the strict inequality `‖y_J‖∞ < 1`.
    pub strict_tol: f64,
    pub lp: LpOptions,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: None,
            kernel_tol: 1e-10,
            supp_tol: 1e-8,
            strict_tol: 1e-9,
            lp: LpOptions::default(),
        }
    }
}

/// Sensing matrix, analysis operator and data, plus optional ground truth
/// and model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub phi: DenseMatrix,
    pub psi: DenseMatrix,
    pub b: Vec<f64>,
    pub x_star: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
}

impl ProblemInstance {
    pub fn new(phi: DenseMatrix, psi: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if phi.ncols() != psi.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "Φ is {:?} but Ψ is {:?}; Φ columns must equal Ψ rows",
                phi.shape(),
                psi.shape()
            )));
        }
        if b.len() != phi.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "b has length {} but Φ has {} rows",
                b.len(),
                phi.nrows()
            )));
        }
        check_finite("b", &b)?;
        Ok(Self {
            phi,
            psi,
            b,
            x_star: None,
            delta: None,
            lambda: None,
        })
    }

    pub fn with_x_star(mut self, x: Vec<f64>) -> Result<Self> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "x_star has length {} but n = {}",
                x.len(),
                self.n()
            )));
        }
        check_finite("x_star", &x)?;
        self.x_star = Some(x);
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidInput(format!("delta must be ≥ 0, got {delta}")));
        }
        self.delta = Some(delta);
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be > 0, got {lambda}")));
        }
        self.lambda = Some(lambda);
        Ok(self)
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    /// Signal dimension.
    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    /// Number of analysis atoms.
    pub fn l(&self) -> usize {
        self.psi.ncols()
    }
}

pub(crate) fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(bad) => Err(Error::InvalidInput(format!("{name} contains non-finite value {bad}"))),
        None => Ok(()),
    }
}

/// Support `I`, cosupport `J` and relaxed set `K` partitioning `0..l`
/// (zero-based), with the signs of `Ψᵀx̄` on `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPattern {
    pub len: usize,
    pub support: Vec<usize>,
    pub cosupport: Vec<usize>,
    pub boxed: Vec<usize>,
    /// `±1`, aligned with `support`.
    pub signs: Vec<f64>,
}

impl SupportPattern {
    /// Pattern with `J = Iᶜ` and `K = ∅`.
    pub fn new(len: usize, support: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let mut in_support = vec![false; len];
        for &i in &support {
            if i >= len || in_support[i] {
                return Err(Error::InvalidInput(format!(
                    "support index {i} is out of range or repeated"
                )));
            }
            in_support[i] = true;
        }
        if signs.len() != support.len() || signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidInput("signs must be ±1, one per support index".into()));
        }
        let cosupport = (0..len).filter(|&i| !in_support[i]).collect();
        Ok(Self {
            len,
            support,
            cosupport,
            boxed: Vec::new(),
            signs,
        })
    }

    /// Restricts the cosupport to `j` (which must be a nonempty subset of
    /// `Iᶜ`) and moves the rest of `Iᶜ` into `K`.
    pub fn with_cosupport(&self, j: &[usize]) -> Result<Self> {
        if j.is_empty() {
            return Err(Error::InvalidInput("cosupport J must be nonempty".into()));
        }
        let complement: Vec<usize> = self.cosupport.iter().chain(&self.boxed).copied().collect();
        let mut chosen = vec![false; self.len];
        for &i in j {
            if !complement.contains(&i) {
                return Err(Error::InvalidInput(format!(
                    "index {i} is not in the complement of the support"
                )));
            }
            if chosen[i] {
                return Err(Error::InvalidInput(format!("index {i} repeated in J")));
            }
            chosen[i] = true;
        }
        let mut cosupport = j.to_vec();
        cosupport.sort_unstable();
        let mut boxed: Vec<usize> = complement.into_iter().filter(|&i| !chosen[i]).collect();
        boxed.sort_unstable();
        Ok(Self {
            len: self.len,
            support: self.support.clone(),
            cosupport,
            boxed,
            signs: self.signs.clone(),
        })
    }

    pub fn sign_vector(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.len];
        for (&i, &v) in self.support.iter().zip(&self.signs) {
            s[i] = v;
        }
        s
    }
}

/// `I = {i : |(Ψᵀx)_i| > supp_tol · ‖Ψᵀx‖∞}` with `J = Iᶜ`, `K = ∅`.
pub fn extract_support(psi: &DenseMatrix, x: &[f64], supp_tol: f64) -> Result<SupportPattern> {
    if !(supp_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("supp_tol must be ≥ 0, got {supp_tol}")));
    }
    let z = psi.tr_mul_vec(x)?;
    let cut = supp_tol * norm_inf(&z);
    let support: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0 && z[i].abs() > cut).collect();
    let signs = support.iter().map(|&i| z[i].signum()).collect();
    SupportPattern::new(z.len(), support, signs)
}

/// Pattern on the `k` largest entries of `|Ψᵀx|` (ties broken by index).
pub fn top_support(psi: &DenseMatrix, x: &[f64], k: usize) -> Result<SupportPattern> {
    let z = psi.tr_mul_vec(x)?;
    if k > z.len() {
        return Err(Error::InvalidInput(format!(
            "support size {k} exceeds the number of atoms {}",
            z.len()
        )));
    }
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    let mut support: Vec<usize> = order[..k].to_vec();
    support.sort_unstable();
    if let Some(&i) = support.iter().find(|&&i| z[i] == 0.0) {
        return Err(Error::InvalidInput(format!(
            "entry {i} of Ψᵀx is zero and has no sign; choose a smaller support"
        )));
    }
    let signs = support.iter().map(|&i| z[i].signum()).collect();
    SupportPattern::new(z.len(), support, signs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    pub ok: bool,
    /// Unit vector in `Ker(Ψ_Jᵀ) ∩ Ker(Φ)` when the test fails.
    pub witness: Option<Vec<f64>>,
    /// Smallest singular value of `Ψ_JᵀQ` (`None` when `Ker(Φ) = {0}`).
    pub sigma_min: Option<f64>,
}

/// Tests `Ker(Ψ_Jᵀ) ∩ Ker(Φ) = {0}` through the column rank of `Ψ_JᵀQ`.
pub fn check_kernel_condition(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    cosupport: &[usize],
    tol: &Tolerances,
) -> Result<KernelCheck> {
    let q = linalg::nullspace_basis(phi, tol.rank_tol)?;
    if q.ncols() == 0 {
        return Ok(KernelCheck {
            ok: true,
            witness: None,
            sigma_min: None,
        });
    }
    let restricted = psi.select_columns(cosupport).transpose().mul(&q)?;
    let split = linalg::right_split_abs(&restricted, tol.kernel_tol * psi.spectral_norm().max(1e-300));
    let k = q.ncols();
    let sigma_min = if restricted.nrows() < k {
        0.0
    } else {
        split.singular_values.last().copied().unwrap_or(0.0)
    };
    if split.kernel.ncols() == 0 {
        return Ok(KernelCheck {
            ok: true,
            witness: None,
            sigma_min: Some(sigma_min),
        });
    }
    let v = split.kernel.col(0);
    let mut w = q.mul_vec(&v)?;
    let nrm = linalg::norm2(&w);
    w.iter_mut().for_each(|x| *x /= nrm);
    Ok(KernelCheck {
        ok: false,
        witness: Some(w),
        sigma_min: Some(sigma_min),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub y: Vec<f64>,
    /// `(ΦΦᵀ)⁻¹ΦΨy`, the multiplier with `Ψy = Φᵀβ`.
    pub beta: Vec<f64>,
    /// Optimal value of the certificate program, `‖y_J‖∞`.
    pub lp_value: f64,
    /// `1 − ‖y_J‖∞`.
    pub gap: f64,
    /// `‖QᵀΨy‖∞`.
    pub range_residual: f64,
    pub sign_match: bool,
}

impl DualCertificate {
    pub fn beta_norm(&self) -> f64 {
        linalg::norm2(&self.beta)
    }

    /// `‖y_J‖∞`.
    pub fn y_j_inf(&self) -> f64 {
        1.0 - self.gap
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CertificateSearch {
    Found(DualCertificate),
    /// No strict certificate; `lp_value` is `None` when the program is
    /// infeasible.
    NotFound { lp_value: Option<f64> },
}

impl CertificateSearch {
    pub fn lp_value(&self) -> Option<f64> {
        match self {
            CertificateSearch::Found(c) => Some(c.lp_value),
            CertificateSearch::NotFound { lp_value } => *lp_value,
        }
    }

    pub fn certificate(&self) -> Option<&DualCertificate> {
        match self {
            CertificateSearch::Found(c) => Some(c),
            CertificateSearch::NotFound { .. } => None,
        }
    }
}

/// Solves the certificate program for `pattern`; with `K ≠ ∅` the `K`
/// coordinates are box-constrained instead of minimized.
pub fn find_certificate(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    pattern: &SupportPattern,
    tol: &Tolerances,
) -> Result<CertificateSearch> {
    check_pattern_dims(psi, pattern)?;
    let q = linalg::nullspace_basis(phi, tol.rank_tol)?;
    let (nj, nk) = (pattern.cosupport.len(), pattern.boxed.len());
    let rest: Vec<usize> = pattern.cosupport.iter().chain(&pattern.boxed).copied().collect();
    let u = if q.ncols() == 0 {
        vec![0.0; nj + nk]
    } else {
        let qt_psi = q.transpose().mul(psi)?;
        let u1: Vec<f64> = qt_psi
            .select_columns(&pattern.support)
            .mul_vec(&pattern.signs)?
            .into_iter()
            .map(|v| -v)
            .collect();
        let a = qt_psi.select_columns(&rest);
        let free: Vec<usize> = (0..nj).collect();
        let boxed: Vec<usize> = (nj..nj + nk).collect();
        let sol = lp::solve_inf_norm_box(&a, &u1, &free, &boxed, &tol.lp)?;
        if sol.status == LpStatus::Infeasible {
            return Ok(CertificateSearch::NotFound { lp_value: None });
        }
        sol.u
    };
    let lp_value = norm_inf(&u[..nj]);
    if lp_value >= 1.0 - tol.strict_tol {
        return Ok(CertificateSearch::NotFound {
            lp_value: Some(lp_value),
        });
    }

    let mut y = pattern.sign_vector();
    for (&i, &v) in rest.iter().zip(&u) {
        y[i] = v;
    }
    let psi_y = psi.mul_vec(&y)?;
    let range_residual = if q.ncols() == 0 {
        0.0
    } else {
        norm_inf(&q.tr_mul_vec(&psi_y)?)
    };
    let beta = multiplier(phi, &psi_y, tol)?;
    let sign_match = pattern.support.iter().zip(&pattern.signs).all(|(&i, &s)| y[i] == s);
    Ok(CertificateSearch::Found(DualCertificate {
        y,
        beta,
        lp_value,
        gap: 1.0 - lp_value,
        range_residual,
        sign_match,
    }))
}

/// `β = (ΦΦᵀ)⁻¹Φ v`; requires `Φ` to have full row rank.
pub(crate) fn multiplier(phi: &DenseMatrix, v: &[f64], tol: &Tolerances) -> Result<Vec<f64>> {
    if linalg::rank(phi, tol.rank_tol)? < phi.nrows() {
        return Err(Error::AssumptionViolation("Φ must have full row rank".into()));
    }
    let gram = phi.mul(&phi.transpose())?;
    let rhs = phi.mul_vec(v)?;
    linalg::solve_square(&gram, &rhs)
        .ok_or_else(|| Error::AssumptionViolation("ΦΦᵀ is singular".into()))
}

fn check_pattern_dims(psi: &DenseMatrix, pattern: &SupportPattern) -> Result<()> {
    if pattern.len != psi.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern covers {} atoms but Ψ has {} columns",
            pattern.len,
            psi.ncols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Unique,
    NotUnique,
    /// The certificate value is within `strict_tol` of one.
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub pattern: SupportPattern,
    pub kernel_ok: bool,
    pub kernel_witness: Option<Vec<f64>>,
    pub kernel_sigma_min: Option<f64>,
    pub certificate: Option<DualCertificate>,
    /// `None` when the certificate program is infeasible.
    pub lp_value: Option<f64>,
    pub verdict: Verdict,
    pub tolerances: Tolerances,
}

fn decide(kernel_ok: bool, lp_value: Option<f64>, strict_tol: f64) -> Verdict {
    if !kernel_ok {
        return Verdict::NotUnique;
    }
    match lp_value {
        None => Verdict::NotUnique,
        Some(v) if (v - 1.0).abs() <= strict_tol => Verdict::Marginal,
        Some(v) if v < 1.0 - strict_tol => Verdict::Unique,
        Some(_) => Verdict::NotUnique,
    }
}

fn verify_pattern(instance: &ProblemInstance, pattern: SupportPattern, tol: &Tolerances) -> Result<ConditionReport> {
    let kernel = check_kernel_condition(&instance.phi, &instance.psi, &pattern.cosupport, tol)?;
    let search = find_certificate(&instance.phi, &instance.psi, &pattern, tol)?;
    let lp_value = search.lp_value();
    Ok(ConditionReport {
        kernel_ok: kernel.ok,
        kernel_witness: kernel.witness,
        kernel_sigma_min: kernel.sigma_min,
        certificate: search.certificate().cloned(),
        lp_value,
        verdict: decide(kernel.ok, lp_value, tol.strict_tol),
        pattern,
        tolerances: *tol,
    })
}

/// Checks the condition with `J = Iᶜ` at `x_bar`.
pub fn verify_condition1(instance: &ProblemInstance, x_bar: &[f64], tol: &Tolerances) -> Result<ConditionReport> {
    check_finite("x_bar", x_bar)?;
    let pattern = extract_support(&instance.psi, x_bar, tol.supp_tol)?;
    verify_pattern(instance, pattern, tol)
}

/// Checks the relaxed condition for a user-supplied nonempty `J ⊆ Iᶜ`.
pub fn verify_condition1_prime(
    instance: &ProblemInstance,
    x_bar: &[f64],
    cosupport: &[usize],
    tol: &Tolerances,
) -> Result<ConditionReport> {
    check_finite("x_bar", x_bar)?;
    let pattern = extract_support(&instance.psi, x_bar, tol.supp_tol)?.with_cosupport(cosupport)?;
    verify_pattern(instance, pattern, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `Φ` has full row rank.
    pub a1: bool,
    /// `λ_max(ΨΨᵀ) = 1` (within 1e-10).
    pub a2: bool,
    /// `Ψ` has full row rank.
    pub a3: bool,
    pub lambda_max_psi: f64,
    /// `1/√λ_max(ΨΨᵀ)`: multiplying `Ψ` by it enforces `a2`.
    pub psi_scale: f64,
}

pub fn check_assumptions(phi: &DenseMatrix, psi: &DenseMatrix, tol: &Tolerances) -> Result<AssumptionReport> {
    let phi_m = linalg::matrix_metrics(phi, tol.rank_tol)?;
    let psi_m = linalg::matrix_metrics(psi, tol.rank_tol)?;
    let lambda_max_psi = psi_m.lambda_max_mmt;
    Ok(AssumptionReport {
        a1: phi_m.rank == phi.nrows(),
        a2: (lambda_max_psi - 1.0).abs() <= 1e-10,
        a3: psi_m.rank == psi.nrows(),
        lambda_max_psi,
        psi_scale: if psi_m.spectral_norm > 0.0 {
            1.0 / psi_m.spectral_norm
        } else {
            f64::INFINITY
        },
    })
}
