//! Sufficient uniqueness conditions from earlier work, evaluated next to the
//! exact certificate test so their relative strength can be checked.
//!
//! With `I` the support, `J = Iᶜ`, `s = sign(Ψ_Iᵀx̄)` and `Q` an orthonormal
//! basis of `Ker(Φ)`:
//!
//! * [`eval_condition2`]: `‖(QᵀΨ_J)⁺QᵀΨ_I s‖∞ < 1` with `Ψ_JᵀQ` of full
//!   column rank
//! * [`eval_condition3`]: `Φ` injective on `Span{Ψ̂_i : |y_i| > t}`, where
//!   `Ψ̂ = (ΨΨᵀ)⁻¹Ψ`
//! * [`eval_condition4_ic`]: `IC = min_{u ∈ Ker(Ψ_J)} ‖Ωs − u‖∞ < 1` with
//!   `Ω = Ψ_J⁺(ΦᵀΦA − I)Ψ_I` and `A = U(UᵀΦᵀΦU)⁻¹Uᵀ`, `U` spanning `Ker(Ψ_Jᵀ)`
//! * [`eval_condition5_rc`]: `RC = max_{‖p‖∞ ≤ 1} min_{u ∈ Ker(Ψ_J)} ‖Ωp − u‖∞ < 1`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    check_kernel_condition, find_certificate, verify_condition1, verify_condition1_prime, ConditionReport,
    ProblemInstance, SupportPattern, Tolerances, Verdict,
};
use crate::error::{Error, Result};
use crate::linalg::{self, norm_inf, DenseMatrix};
use crate::lp::{self, LpStatus};

/// Largest `|I|` for which every sign vertex is enumerated.
pub const RC_VERTEX_BUDGET: usize = 20;
const RC_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition2 {
    pub holds: bool,
    pub rank_ok: bool,
    pub value: f64,
}

pub fn eval_condition2(phi: &DenseMatrix, psi: &DenseMatrix, pattern: &SupportPattern, tol: &Tolerances) -> Result<Condition2> {
    check_pattern(psi, pattern)?;
    let q = linalg::nullspace_basis(phi, tol.rank_tol)?;
    if q.ncols() == 0 {
        return Ok(Condition2 {
            holds: true,
            rank_ok: true,
            value: 0.0,
        });
    }
    let rank_ok = check_kernel_condition(phi, psi, &pattern.cosupport, tol)?.ok;
    let qt_psi = q.transpose().mul(psi)?;
    let rhs = qt_psi.select_columns(&pattern.support).mul_vec(&pattern.signs)?;
    let pinv = linalg::pseudo_inverse(&qt_psi.select_columns(&pattern.cosupport), tol.rank_tol)?;
    let value = norm_inf(&pinv.mul_vec(&rhs)?);
    Ok(Condition2 {
        holds: rank_ok && value < 1.0 - tol.strict_tol,
        rank_ok,
        value,
    })
}

fn check_pattern(psi: &DenseMatrix, pattern: &SupportPattern) -> Result<()> {
    if pattern.len != psi.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern covers {} atoms but Ψ has {} columns",
            pattern.len,
            psi.ncols()
        )));
    }
    Ok(())
}

/// The pieces shared by the IC and RC evaluations.
struct OmegaSetup {
    omega: DenseMatrix,
    /// Orthonormal basis of `Ker(Ψ_J)^⊥` in `R^{|J|}`; `w − Ωp ∈ Ker(Ψ_J)` iff
    /// `Rᵀw = RᵀΩp`.
    r: DenseMatrix,
    /// `ΦAΦᵀ − I`, reused for `c_J`.
    phi_a_phit_minus_i: DenseMatrix,
    psi_j_pinv: DenseMatrix,
}

fn omega_setup(phi: &DenseMatrix, psi: &DenseMatrix, support: &[usize], cosupport: &[usize], tol: &Tolerances) -> Result<OmegaSetup> {
    let n = phi.ncols();
    let psi_j = psi.select_columns(cosupport);
    let psi_i = psi.select_columns(support);
    let u = linalg::nullspace_basis(&psi_j.transpose(), tol.rank_tol)?;
    let a = if u.ncols() == 0 {
        DenseMatrix::zeros(n, n)
    } else {
        let phi_u = phi.mul(&u)?;
        let gram = phi_u.transpose().mul(&phi_u)?;
        let sigma = linalg::subspace_metrics(phi, &u)?.sigma_min;
        if sigma <= tol.kernel_tol * phi.spectral_norm() {
            return Err(Error::UnboundedRatio);
        }
        let inv = linalg::pseudo_inverse(&gram, tol.rank_tol)?;
        u.mul(&inv)?.mul(&u.transpose())?
    };
    let gram_phi = phi.transpose().mul(phi)?;
    let core = gram_phi.mul(&a)?.sub(&DenseMatrix::identity(n))?;
    let psi_j_pinv = linalg::pseudo_inverse(&psi_j, tol.rank_tol)?;
    let omega = psi_j_pinv.mul(&core)?.mul(&psi_i)?;
    let r = linalg::row_space_basis(&psi_j, tol.rank_tol)?;
    let phi_a_phit_minus_i = phi.mul(&a)?.mul(&phi.transpose())?.sub(&DenseMatrix::identity(phi.nrows()))?;
    Ok(OmegaSetup {
        omega,
        r,
        phi_a_phit_minus_i,
        psi_j_pinv,
    })
}

impl OmegaSetup {
    /// `min_{u ∈ Ker(Ψ_J)} ‖Ωp − u‖∞`
    fn inner(&self, p: &[f64], tol: &Tolerances) -> Result<f64> {
        let w = self.omega.mul_vec(p)?;
        if self.r.ncols() == 0 {
            return Ok(0.0);
        }
        if self.r.ncols() == self.r.nrows() {
            return Ok(norm_inf(&w));
        }
        let rt = self.r.transpose();
        let sol = lp::solve_inf_norm_eq(&rt, &rt.mul_vec(&w)?, &tol.lp)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.value),
            _ => Err(Error::Infeasible("projection program has no solution".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition4 {
    pub holds: bool,
    pub ic: f64,
    /// `Ω`, of shape `|J| × |I|`.
    pub omega: DenseMatrix,
}

pub fn eval_condition4_ic(phi: &DenseMatrix, psi: &DenseMatrix, pattern: &SupportPattern, tol: &Tolerances) -> Result<Condition4> {
    check_pattern(psi, pattern)?;
    let setup = omega_setup(phi, psi, &pattern.support, &pattern.cosupport, tol)?;
    let ic = setup.inner(&pattern.signs, tol)?;
    Ok(Condition4 {
        holds: ic < 1.0 - tol.strict_tol,
        ic,
        omega: setup.omega,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition5 {
    pub holds: bool,
    pub rc: f64,
    /// Largest row 2-norm of `Ψ_J⁺Φᵀ(ΦAΦᵀ − I)`.
    pub c_j: f64,
    /// False when `|I|` exceeded the budget and `rc` is a sampled lower bound.
    pub exhaustive: bool,
}

impl Condition5 {
    /// `ρ‖w‖₂c_J / (2(1 − RC))`, or `None` when `RC ≥ 1`.
    pub fn suggested_lambda(&self, noise_norm: f64, rho_factor: f64) -> Option<f64> {
        (self.rc < 1.0).then(|| rho_factor * noise_norm * self.c_j / (2.0 * (1.0 - self.rc)))
    }
}

pub fn eval_condition5_rc(
    phi: &DenseMatrix,
    psi: &DenseMatrix,
    support: &[usize],
    cosupport: &[usize],
    tol: &Tolerances,
) -> Result<Condition5> {
    let setup = omega_setup(phi, psi, support, cosupport, tol)?;
    let c_mat = setup.psi_j_pinv.mul(&phi.transpose())?.mul(&setup.phi_a_phit_minus_i)?;
    let c_j = (0..c_mat.nrows())
        .map(|i| linalg::norm2(&c_mat.row(i)))
        .fold(0.0, f64::max);
    let k = support.len();
    // The inner value is even in p, so fixing p₀ = +1 covers every vertex.
    let (codes, exhaustive): (Vec<u64>, bool) = if k == 0 {
        (Vec::new(), true)
    } else if k <= RC_VERTEX_BUDGET {
        ((0..1u64 << (k - 1)).collect(), true)
    } else {
        ((0..RC_SAMPLES as u64).collect(), false)
    };
    let vertex = |code: u64| -> Vec<f64> {
        if exhaustive {
            (0..k)
                .map(|i| if i == 0 || code >> (i - 1) & 1 == 0 { 1.0 } else { -1.0 })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(code);
            (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
        }
    };
    let rc = codes
        .par_iter()
        .map(|&c| setup.inner(&vertex(c), tol))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(Condition5 {
        holds: exhaustive && rc < 1.0 - tol.strict_tol,
        rc,
        c_j,
        exhaustive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition3 {
    pub holds: bool,
    /// `I(t) = {i : |y_i| > t}`.
    pub i_t: Vec<usize>,
}

pub fn eval_condition3(phi: &DenseMatrix, psi: &DenseMatrix, y: &[f64], t: f64, tol: &Tolerances) -> Result<Condition3> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!("t must lie in (0, 1), got {t}")));
    }
    if y.len() != psi.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "y has length {} but Ψ has {} columns",
            y.len(),
            psi.ncols()
        )));
    }
    let i_t: Vec<usize> = (0..y.len()).filter(|&i| y[i].abs() > t).collect();
    if i_t.is_empty() {
        return Ok(Condition3 { holds: true, i_t });
    }
    if linalg::rank(psi, tol.rank_tol)? < psi.nrows() {
        return Err(Error::AssumptionViolation("ΨΨᵀ must be invertible".into()));
    }
    let frame = psi.mul(&psi.transpose())?;
    let psi_hat = linalg::pseudo_inverse(&frame, tol.rank_tol)?.mul(psi)?;
    let basis = linalg::range_basis(&psi_hat.select_columns(&i_t), tol.rank_tol)?;
    if basis.ncols() == 0 {
        return Ok(Condition3 { holds: true, i_t });
    }
    let sigma = linalg::subspace_metrics(phi, &basis)?.sigma_min;
    Ok(Condition3 {
        holds: sigma > tol.kernel_tol * phi.spectral_norm(),
        i_t,
    })
}

pub const T_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond3Summary {
    pub holds: bool,
    /// Smallest grid value of `t` at which the condition holds.
    pub t_used: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cond2: Condition2,
    pub cond3: Cond3Summary,
    /// `None` when the kernel condition fails and `Ω` is undefined.
    pub cond4: Option<Condition4>,
    pub cond5: Option<Condition5>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond3Check {
    pub t: f64,
    pub i_t: Vec<usize>,
    pub holds: bool,
    /// Verdict of the relaxed condition with `J = I(t)ᶜ`, when checked.
    pub prime_verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicationReport {
    pub comparison: ComparisonReport,
    pub condition1: ConditionReport,
    pub cond3_grid: Vec<Cond3Check>,
    /// Human-readable description of every violated implication.
    pub violations: Vec<String>,
}

/// Evaluates every condition at `x_bar` and checks the implications between
/// them: conditions 2 and 4 imply uniqueness, 5 implies 4, `RC ≥ IC`, and
/// condition 3 at `(y, t)` implies the relaxed certificate condition with
/// `J = I(t)ᶜ`.
pub fn implication_tests(instance: &ProblemInstance, x_bar: &[f64], tol: &Tolerances) -> Result<ImplicationReport> {
    let (phi, psi) = (&instance.phi, &instance.psi);
    let condition1 = verify_condition1(instance, x_bar, tol)?;
    let pattern = &condition1.pattern;
    let cond2 = eval_condition2(phi, psi, pattern, tol)?;
    let cond4 = match eval_condition4_ic(phi, psi, pattern, tol) {
        Ok(c) => Some(c),
        Err(Error::UnboundedRatio) => None,
        Err(e) => return Err(e),
    };
    let cond5 = match eval_condition5_rc(phi, psi, &pattern.support, &pattern.cosupport, tol) {
        Ok(c) => Some(c),
        Err(Error::UnboundedRatio) => None,
        Err(e) => return Err(e),
    };

    let mut violations = Vec::new();
    let unique = condition1.verdict == Verdict::Unique;
    if cond2.holds && !unique {
        violations.push(format!("condition 2 holds (value {}) but verdict is {:?}", cond2.value, condition1.verdict));
    }
    if let Some(c4) = &cond4 {
        if c4.holds && !unique {
            violations.push(format!("condition 4 holds (IC {}) but verdict is {:?}", c4.ic, condition1.verdict));
        }
    }
    if let (Some(c4), Some(c5)) = (&cond4, &cond5) {
        if c5.holds && !c4.holds {
            violations.push(format!("condition 5 holds (RC {}) but condition 4 fails (IC {})", c5.rc, c4.ic));
        }
        if c5.exhaustive && c5.rc < c4.ic - 1e-10 {
            violations.push(format!("RC {} is below IC {}", c5.rc, c4.ic));
        }
    }

    // Condition 3 needs a dual vector y with y_I = s, ‖y‖∞ ≤ 1 and Ψy ∈ Im(Φᵀ).
    // Without a strict certificate, a non-strict one (‖y_J‖∞ = 1) still serves.
    let mut cond3_grid = Vec::new();
    let y = condition1.certificate.as_ref().map(|c| c.y.clone()).or_else(|| {
        find_certificate(phi, psi, pattern, &Tolerances { strict_tol: -1.0, ..*tol })
            .ok()
            .and_then(|s| s.certificate().map(|c| c.y.clone()))
            .filter(|y| norm_inf(y) <= 1.0 + 1e-12)
    });
    let frame_invertible = linalg::rank(psi, tol.rank_tol)? == psi.nrows();
    if let (Some(y), true) = (y, frame_invertible) {
        for t in T_GRID {
            let c3 = eval_condition3(phi, psi, &y, t, tol)?;
            let mut check = Cond3Check {
                t,
                i_t: c3.i_t.clone(),
                holds: c3.holds,
                prime_verdict: None,
            };
            if c3.holds {
                let j: Vec<usize> = (0..psi.ncols()).filter(|i| !c3.i_t.contains(i)).collect();
                let verdict = if j.is_empty() {
                    condition1.verdict
                } else {
                    verify_condition1_prime(instance, x_bar, &j, tol)?.verdict
                };
                if verdict != Verdict::Unique {
                    violations.push(format!("condition 3 holds at t = {t} but the relaxed condition gives {verdict:?}"));
                }
                check.prime_verdict = Some(verdict);
            }
            cond3_grid.push(check);
        }
    }
    let t_used = cond3_grid.iter().find(|c| c.holds).map(|c| c.t);
    Ok(ImplicationReport {
        comparison: ComparisonReport {
            cond2,
            cond3: Cond3Summary {
                holds: t_used.is_some(),
                t_used,
            },
            cond4,
            cond5,
        },
        condition1,
        cond3_grid,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn three_atom() -> ProblemInstance {
        ProblemInstance::new(
            m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            m(&[&[10.5, 1.0, 10.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            vec![-1.0, -10.0],
        )
        .unwrap()
    }

    fn sec4_pattern() -> SupportPattern {
        SupportPattern::new(3, vec![0], vec![1.0]).unwrap()
    }

    fn e0() -> ProblemInstance {
        ProblemInstance::new(m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]), DenseMatrix::identity(3), vec![2.0, 0.0]).unwrap()
    }

    #[test]
    fn condition2_examples() {
        let tol = Tolerances::default();
        let s = three_atom();
        let c = eval_condition2(&s.phi, &s.psi, &sec4_pattern(), &tol).unwrap();
        assert_abs_diff_eq!(c.value, 105.0 / 101.0, epsilon = 1e-12);
        assert!(!c.holds);

        let e = e0();
        let c = eval_condition2(&e.phi, &e.psi, &sec4_pattern(), &tol).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.holds);

        let c = eval_condition2(&DenseMatrix::identity(2), &DenseMatrix::identity(2), &SupportPattern::new(2, vec![0], vec![1.0]).unwrap(), &tol)
            .unwrap();
        assert!(c.holds);
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn condition4_examples() {
        let tol = Tolerances::default();
        let s = three_atom();
        let c = eval_condition4_ic(&s.phi, &s.psi, &sec4_pattern(), &tol).unwrap();
        assert_abs_diff_eq!(c.ic, 105.0 / 101.0, epsilon = 1e-12);
        assert!(!c.holds);
        assert_eq!(c.omega.shape(), (2, 1));
        assert_abs_diff_eq!(c.omega.get(0, 0).abs(), 10.5 / 101.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.omega.get(1, 0).abs(), 105.0 / 101.0, epsilon = 1e-12);

        let e = e0();
        let c = eval_condition4_ic(&e.phi, &e.psi, &sec4_pattern(), &tol).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.ic, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn condition4_projects_onto_kernel_of_psi_j() {
        // Ψ_J has a kernel: its two columns are equal, so IC may subtract
        // multiples of (1, −1).
        let tol = Tolerances::default();
        let psi = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 1.0]]);
        let phi = m(&[&[1.0, 0.5]]);
        let pat = SupportPattern::new(3, vec![0], vec![1.0]).unwrap();
        let c = eval_condition4_ic(&phi, &psi, &pat, &tol).unwrap();
        let w = c.omega.col(0);
        let direct = ((w[0] + w[1]) / 2.0).abs();
        assert_abs_diff_eq!(c.ic, direct, epsilon = 1e-10);
    }

    #[test]
    fn condition5_examples() {
        let tol = Tolerances::default();
        let s = three_atom();
        let c = eval_condition5_rc(&s.phi, &s.psi, &[0], &[1, 2], &tol).unwrap();
        assert_abs_diff_eq!(c.rc, 105.0 / 101.0, epsilon = 1e-12);
        assert!(c.exhaustive && !c.holds);
        assert!(c.suggested_lambda(1.0, 1.0).is_none());

        let e = e0();
        let c = eval_condition5_rc(&e.phi, &e.psi, &[0], &[1, 2], &tol).unwrap();
        assert_abs_diff_eq!(c.rc, 0.0, epsilon = 1e-14);
        assert!(c.holds);
        let lam = c.suggested_lambda(0.1, 2.0).unwrap();
        assert_abs_diff_eq!(lam, 2.0 * 0.1 * c.c_j / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn condition3_examples() {
        let tol = Tolerances::default();
        let e = e0();
        let c = eval_condition3(&e.phi, &e.psi, &[1.0, 0.0, 0.0], 0.5, &tol).unwrap();
        assert_eq!(c.i_t, vec![0]);
        assert!(c.holds);

        let c = eval_condition3(&e.phi, &e.psi, &[0.2, 0.0, 0.0], 0.5, &tol).unwrap();
        assert!(c.i_t.is_empty() && c.holds);

        let s = three_atom();
        let y = [1.0, -21.0 / 22.0, -21.0 / 22.0];
        let c = eval_condition3(&s.phi, &s.psi, &y, 0.9, &tol).unwrap();
        assert_eq!(c.i_t, vec![0, 1, 2]);
        assert!(!c.holds);

        assert!(eval_condition3(&e.phi, &e.psi, &[1.0, 0.0, 0.0], 1.0, &tol).is_err());
        assert!(eval_condition3(&e.phi, &e.psi, &[1.0, 0.0, 0.0], 0.0, &tol).is_err());
    }

    #[test]
    fn implications_on_examples() {
        let tol = Tolerances::default();
        let r = implication_tests(&three_atom(), &[1.0, -1.0, -10.0], &tol).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(!r.comparison.cond2.holds);
        assert!(!r.comparison.cond4.as_ref().unwrap().holds);
        assert_eq!(r.condition1.verdict, Verdict::Unique);

        let r = implication_tests(&e0(), &[2.0, 0.0, 0.0], &tol).unwrap();
        assert!(r.violations.is_empty(), "{:?}", r.violations);
        assert!(r.comparison.cond2.holds);
        assert!(r.comparison.cond3.holds);
        assert!(r.comparison.cond4.as_ref().unwrap().holds);
        assert!(r.comparison.cond5.as_ref().unwrap().holds);
    }
}
