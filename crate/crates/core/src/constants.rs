//! Explicit robustness constants and error bounds derived from a dual
//! certificate.
//!
//! The constants for the noisy models assume `λ_max(ΨΨᵀ) = 1`. When the
//! given `Ψ` violates this, it is rescaled by `1/σ_max(Ψ)` first; `y` is
//! unchanged by the rescaling and `β` scales with `Ψ`. The resulting bounds
//! then refer to the rescaled operator and `psi_rescaled` is set.

use serde::{Deserialize, Serialize};

use crate::certify::{DualCertificate, SupportPattern, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{self, norm1, norm2, DenseMatrix};

/// `r(J) = sup_{u ∈ Ker(Ψ_Jᵀ)∖{0}} ‖u‖₂/‖Φu‖₂`, computed as `1/σ_min(ΦU)`
/// for an orthonormal basis `U` of `Ker(Ψ_Jᵀ)`. Zero when the kernel is
/// trivial.
pub fn r_of_j(phi: &DenseMatrix, psi: &DenseMatrix, cosupport: &[usize], tol: &Tolerances) -> Result<f64> {
    let u = cosupport_kernel(psi, cosupport, tol)?;
    if u.ncols() == 0 {
        return Ok(0.0);
    }
    let sigma_min = linalg::subspace_metrics(phi, &u)?.sigma_min;
    if sigma_min <= tol.kernel_tol * phi.spectral_norm() {
        return Err(Error::UnboundedRatio);
    }
    Ok(1.0 / sigma_min)
}

/// Orthonormal basis of `Ker(Ψ_Jᵀ)`.
fn cosupport_kernel(psi: &DenseMatrix, cosupport: &[usize], tol: &Tolerances) -> Result<DenseMatrix> {
    linalg::nullspace_basis(&psi.select_columns(cosupport).transpose(), tol.rank_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConstants {
    pub r_j: f64,
    pub c3: f64,
    pub c4: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub beta_norm: f64,
    pub rho: f64,
    pub tau: f64,
    pub cond_psi: f64,
    pub phi_norm: f64,
    pub y_j_inf: f64,
    pub psi_rescaled: bool,
    /// Factor applied to `Ψ` (1 when no rescaling was needed).
    pub psi_scale: f64,
}

/// `C₀ = √(4C₄ / (4‖β‖₂ + C₄‖β‖₂²))`, which minimizes `C₁` over `C₀ > 0`.
pub fn optimal_c0(c4: f64, beta_norm: f64) -> f64 {
    (4.0 * c4 / (4.0 * beta_norm + c4 * beta_norm * beta_norm)).sqrt()
}

/// `C₁(C₀) = 2C₃ + C₀‖β‖₂ + (1 + C₀‖β‖₂/2)² C₄ / C₀`.
pub fn c1_for(c0: f64, c3: f64, c4: f64, beta_norm: f64) -> f64 {
    let t = 1.0 + c0 * beta_norm / 2.0;
    2.0 * c3 + c0 * beta_norm + t * t * c4 / c0
}

/// Computes every constant of the noisy-recovery bounds for a valid
/// certificate. Without `c0`, the minimizing choice is used.
pub fn robustness_constants(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    cert: &DualCertificate,
    pattern: &SupportPattern,
    c0: Option<f64>,
    tol: &Tolerances,
) -> Result<RobustnessConstants> {
    if !(cert.gap > 0.0) {
        return Err(Error::InvalidCertificate(format!(
            "certificate gap must be positive, got {}",
            cert.gap
        )));
    }
    if let Some(c) = c0 {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("C0 must be positive, got {c}")));
        }
    }
    let psi_norm = psi.spectral_norm();
    let psi_scale = 1.0 / psi_norm;
    let psi_rescaled = (psi_norm - 1.0).abs() > 1e-12;
    let psi = if psi_rescaled { psi.scale(psi_scale) } else { psi.clone() };
    let beta_norm = if psi_rescaled {
        psi_scale * cert.beta_norm()
    } else {
        cert.beta_norm()
    };

    let r_j = r_of_j(phi, &psi, &pattern.cosupport, tol)?;
    let c3 = r_j * (pattern.support.len() as f64).sqrt();
    let cond_psi = linalg::matrix_metrics(&psi, tol.rank_tol)?.cond;
    let phi_norm = phi.spectral_norm();
    let y_j_inf = cert.y_j_inf();
    let c4 = (1.0 + cond_psi * phi_norm * c3) / (1.0 - y_j_inf);
    let c0 = match c0 {
        Some(c) => c,
        None if beta_norm > 0.0 => optimal_c0(c4, beta_norm),
        None => {
            return Err(Error::InvalidCertificate(
                "β = 0 leaves the optimal C0 undefined; pass C0 explicitly".into(),
            ))
        }
    };
    let c1 = c1_for(c0, c3, c4, beta_norm);
    let c2 = 2.0 * c3 + 2.0 * c4 * beta_norm;
    let rt = rho_tau(phi, &psi, &pattern.support, &pattern.cosupport, tol)?;
    Ok(RobustnessConstants {
        r_j,
        c3,
        c4,
        c0,
        c1,
        c2,
        beta_norm,
        rho: rt.rho,
        tau: rt.tau,
        cond_psi,
        phi_norm,
        y_j_inf,
        psi_rescaled,
        psi_scale: if psi_rescaled { psi_scale } else { 1.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoTau {
    pub rho: f64,
    pub tau: f64,
}

/// A pair with `‖Ψ_Iᵀx‖₂ ≤ ρ‖Ψ_Jᵀx‖₁ + τ‖Φx‖₂` for all `x`.
///
/// Writes `x = Uα + Vγ` with `U` spanning `Ker(Ψ_Jᵀ)` and `V` its orthogonal
/// complement, then bounds `α` through `Φ` and `γ` through `Ψ_Jᵀ`:
/// `τ = ‖Ψ_IᵀU‖/σ_min(ΦU)` and
/// `ρ = (‖Ψ_IᵀU‖·‖ΦV‖/σ_min(ΦU) + ‖Ψ_IᵀV‖) / σ_min(Ψ_JᵀV)`.
pub fn rho_tau(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    support: &[usize],
    cosupport: &[usize],
    tol: &Tolerances,
) -> Result<RhoTau> {
    let psi_j_t = psi.select_columns(cosupport).transpose();
    let psi_i_t = psi.select_columns(support).transpose();
    let rank_tol = tol.rank_tol.unwrap_or_else(|| linalg::default_rank_tol(&psi_j_t));
    let split = linalg::right_split(&psi_j_t, rank_tol);
    let (u, v) = (split.kernel, split.row_space);

    let (tau, u_term) = if u.ncols() == 0 {
        (0.0, 0.0)
    } else {
        let sigma = linalg::subspace_metrics(phi, &u)?.sigma_min;
        if sigma <= tol.kernel_tol * phi.spectral_norm() {
            return Err(Error::UnboundedRatio);
        }
        let psi_i_u = psi_i_t.mul(&u)?.spectral_norm();
        (psi_i_u / sigma, psi_i_u / sigma)
    };
    let rho = if v.ncols() == 0 {
        0.0
    } else {
        let phi_v = phi.mul(&v)?.spectral_norm();
        let psi_i_v = psi_i_t.mul(&v)?.spectral_norm();
        let sigma_jv = linalg::subspace_metrics(&psi_j_t, &v)?.sigma_min;
        (u_term * phi_v + psi_i_v) / sigma_jv
    };
    Ok(RhoTau { rho, tau })
}

/// `d_y(x, x̄) = ‖Ψᵀx‖₁ − ‖Ψᵀx̄‖₁ − ⟨Ψy, x − x̄⟩`.
pub fn bregman_distance(psi: &DenseMatrix, y: &[f64], x: &[f64], x_bar: &[f64]) -> Result<f64> {
    let psi_y = psi.mul_vec(y)?;
    Ok(norm1(&psi.tr_mul_vec(x)?) - norm1(&psi.tr_mul_vec(x_bar)?) - linalg::dot(&psi_y, &linalg::sub(x, x_bar)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm2Bounds {
    /// Bound on `‖Ψᵀ(x_{δ,λ} − x*)‖₁` for the penalized model with `λ = C₀δ`.
    pub bound_1b: f64,
    /// Bound on `‖Ψᵀ(x_δ − x*)‖₁` for the constrained model.
    pub bound_1c: f64,
}

pub fn thm2_bounds(constants: &RobustnessConstants, delta: f64) -> Result<Thm2Bounds> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("delta must be ≥ 0, got {delta}")));
    }
    Ok(Thm2Bounds {
        bound_1b: constants.c1 * delta,
        bound_1c: constants.c2 * delta,
    })
}

/// Bound on `‖Ψᵀ(x_δ − x*)‖₂` for approximately sparse `x*`:
/// `2(1+ρ)/(1−‖y_J‖∞)·‖Ψ_Jᵀx*‖₁ + (2(1+ρ)‖β‖₂/(1−‖y_J‖∞) + 2τ)δ`.
///
/// `support` must index the `|I|` largest entries of `|Ψᵀx*|` and the
/// certificate must carry their signs.
pub fn thm3_bound(
    psi: &DenseMatrix,
    x_star: &[f64],
    support: &[usize],
    cert: &DualCertificate,
    rt: RhoTau,
    delta: f64,
) -> Result<f64> {
    if !(cert.gap > 0.0) {
        return Err(Error::InvalidCertificate(format!(
            "certificate gap must be positive, got {}",
            cert.gap
        )));
    }
    let z = psi.tr_mul_vec(x_star)?;
    let mut in_support = vec![false; z.len()];
    for &i in support {
        in_support[i] = true;
    }
    let smallest_kept = support.iter().map(|&i| z[i].abs()).fold(f64::INFINITY, f64::min);
    let largest_dropped = (0..z.len())
        .filter(|&i| !in_support[i])
        .map(|i| z[i].abs())
        .fold(0.0, f64::max);
    if !support.is_empty() && smallest_kept < largest_dropped {
        return Err(Error::InvalidInput(
            "support must hold the largest entries of Ψᵀx*".into(),
        ));
    }
    if support.iter().any(|&i| cert.y[i] != z[i].signum()) {
        return Err(Error::InvalidCertificate("y_I must equal sign(Ψ_Iᵀx*)".into()));
    }
    let tail: f64 = (0..z.len()).filter(|&i| !in_support[i]).map(|i| z[i].abs()).sum();
    Ok(relaxed_thm3_bound(0.0, rt.rho, rt.tau, cert.y_j_inf(), cert.beta_norm(), tail, delta)
        .expect("μ₁ = ‖y_J‖∞ < 1 for a positive gap"))
}

/// Bound for a certificate whose `y_I` is only within `θ₁` (in ℓ₂) of the
/// true signs. With `μ₁ = ρθ₁ + ‖y_J‖∞` and `μ₂ = τθ₁ + ‖β‖₂`, returns
/// `2(1+ρ)/(1−μ₁)·tail + (2(1+ρ)μ₂/(1−μ₁) + 2τ)δ`, or `None` when `μ₁ ≥ 1`.
pub fn relaxed_thm3_bound(
    theta1: f64,
    rho: f64,
    tau: f64,
    y_j_inf: f64,
    beta_norm: f64,
    tail_l1: f64,
    delta: f64,
) -> Option<f64> {
    let mu1 = rho * theta1 + y_j_inf;
    let mu2 = tau * theta1 + beta_norm;
    if mu1 >= 1.0 {
        return None;
    }
    let lead = 2.0 * (1.0 + rho) / (1.0 - mu1);
    Some(lead * tail_l1 + (lead * mu2 + 2.0 * tau) * delta)
}

/// Tail mass `‖Ψ_Jᵀx‖₁` on the complement of `support`.
pub fn tail_l1(psi: &DenseMatrix, x: &[f64], support: &[usize]) -> Result<f64> {
    let z = psi.tr_mul_vec(x)?;
    Ok((0..z.len()).filter(|i| !support.contains(i)).map(|i| z[i].abs()).sum())
}

/// `‖Ψᵀ(a − b)‖₂`
pub fn analysis_l2_distance(psi: &DenseMatrix, a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(norm2(&psi.tr_mul_vec(&linalg::sub(a, b))?))
}
