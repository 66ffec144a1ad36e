mod common;

use common::*;
use l1cert::certify::{
    check_kernel_condition, find_certificate, verify_condition1, verify_condition1_prime, ProblemInstance,
    SupportPattern, Tolerances, Verdict,
};
use l1cert::linalg::{self, norm2, norm_inf, pick, DenseMatrix};
use l1cert::solvers::solve_bp;
use rand::Rng;

fn instance(phi: DenseMatrix, psi: DenseMatrix, x: &[f64]) -> ProblemInstance {
    let b = phi.mul_vec(x).unwrap();
    ProblemInstance::new(phi, psi, b).unwrap()
}

/// Random (Φ, Ψ, x) with Ψ either the identity or a random square basis,
/// and x sparse in the analysis domain.
fn draw(seed: u64) -> (DenseMatrix, DenseMatrix, Vec<f64>) {
    let mut r = rng(seed);
    let n = r.random_range(3..8);
    let m = r.random_range(1..n);
    let k = r.random_range(1..=m);
    let phi = gaussian(&mut r, m, n);
    let psi = if r.random_bool(0.5) {
        DenseMatrix::identity(n)
    } else {
        gaussian(&mut r, n, n)
    };
    // Ψᵀx = z with z sparse.
    let z = sparse_vec(&mut r, n, k);
    let x = linalg::pseudo_inverse(&psi.transpose(), None).unwrap().mul_vec(&z).unwrap();
    (phi, psi, x)
}

#[test]
fn certificate_satisfies_its_defining_constraints() {
    let tol = Tolerances::default();
    let mut found = 0;
    for seed in 0..200 {
        let (phi, psi, x) = draw(seed);
        let inst = instance(phi.clone(), psi.clone(), &x);
        let report = verify_condition1(&inst, &x, &tol).unwrap();
        let Some(cert) = report.certificate else { continue };
        found += 1;
        let p = &report.pattern;
        for (&i, &s) in p.support.iter().zip(&p.signs) {
            assert!((cert.y[i] - s).abs() < 1e-12, "seed {seed}: y_I ≠ s");
        }
        let y_j = norm_inf(&pick(&cert.y, &p.cosupport));
        assert!((y_j - cert.lp_value).abs() < 1e-9, "seed {seed}: ‖y_J‖∞ = {y_j}, lp = {}", cert.lp_value);
        assert!((cert.gap - (1.0 - cert.lp_value)).abs() < 1e-15);
        assert!(cert.sign_match);
        // Ψy lies in the range of Φᵀ, with Φᵀβ as the witness.
        let psi_y = psi.mul_vec(&cert.y).unwrap();
        let phit_beta = phi.tr_mul_vec(&cert.beta).unwrap();
        let miss = norm2(&linalg::sub(&psi_y, &phit_beta));
        assert!(miss < 1e-8 * (1.0 + norm2(&psi_y)), "seed {seed}: Ψy − Φᵀβ = {miss:e}");
        assert!(cert.range_residual < 1e-8 * (1.0 + norm2(&psi_y)));
    }
    assert!(found > 40, "only {found} certified draws");
}

#[test]
fn lp_value_is_invariant_under_invertible_row_mixing() {
    let tol = Tolerances::default();
    let mut compared = 0;
    for seed in 0..100 {
        let (phi, psi, x) = draw(seed);
        let mut r = rng(1000 + seed);
        let mix = gaussian(&mut r, phi.nrows(), phi.nrows());
        if linalg::matrix_metrics(&mix, None).unwrap().lambda_min_mmt < 1e-4 {
            continue;
        }
        let a = verify_condition1(&instance(phi.clone(), psi.clone(), &x), &x, &tol).unwrap();
        let b = verify_condition1(&instance(mix.mul(&phi).unwrap(), psi, &x), &x, &tol).unwrap();
        assert_eq!(a.kernel_ok, b.kernel_ok, "seed {seed}");
        match (a.lp_value, b.lp_value) {
            (Some(u), Some(v)) => assert!((u - v).abs() < 1e-7 * (1.0 + u), "seed {seed}: {u} vs {v}"),
            (u, v) => assert_eq!(u.is_some(), v.is_some(), "seed {seed}"),
        }
        compared += 1;
    }
    assert!(compared > 50);
}

#[test]
fn kernel_witness_lies_in_both_kernels() {
    let tol = Tolerances::default();
    // Φ = [1 1 0], Ψ = I, J = {1, 2}: e₀ − e₁ is killed by Φ, but not by Ψ_Jᵀ.
    // With J = {2} the direction e₀ − e₁ is in both kernels.
    let phi = rows(&[&[1.0, 1.0, 0.0]]);
    let psi = DenseMatrix::identity(3);
    assert!(check_kernel_condition(&phi, &psi, &[1, 2], &tol).unwrap().ok);
    let bad = check_kernel_condition(&phi, &psi, &[2], &tol).unwrap();
    assert!(!bad.ok);
    let w = bad.witness.unwrap();
    assert!((norm2(&w) - 1.0).abs() < 1e-12);
    assert!(norm_inf(&phi.mul_vec(&w).unwrap()) < 1e-12);
    assert!(w[2].abs() < 1e-12);

    let mut hits = 0;
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = r.random_range(4..9);
        let m = r.random_range(1..n - 1);
        let l = r.random_range(n..n + 4);
        let phi = gaussian(&mut r, m, n);
        let psi = gaussian(&mut r, n, l);
        let j: Vec<usize> = (0..l).filter(|_| r.random_bool(0.3)).collect();
        let check = check_kernel_condition(&phi, &psi, &j, &tol).unwrap();
        if let Some(w) = check.witness {
            hits += 1;
            assert!(!check.ok);
            assert!(norm_inf(&phi.mul_vec(&w).unwrap()) < 1e-10, "seed {seed}");
            let psi_j_w = psi.select_columns(&j).tr_mul_vec(&w).unwrap();
            assert!(norm_inf(&psi_j_w) < 1e-10, "seed {seed}");
        } else {
            // Generic position: the intersection is trivial exactly when
            // |J| + m ≥ n.
            assert!(check.ok);
            assert!(j.len() + m >= n, "seed {seed}: ok with |J| = {}, m = {m}, n = {n}", j.len());
        }
    }
    assert!(hits > 10);
}

#[test]
fn relaxed_check_with_full_cosupport_matches_plain_check() {
    let tol = Tolerances::default();
    for seed in 0..60 {
        let (phi, psi, x) = draw(seed);
        let inst = instance(phi, psi, &x);
        let plain = verify_condition1(&inst, &x, &tol).unwrap();
        let relaxed = verify_condition1_prime(&inst, &x, &plain.pattern.cosupport, &tol).unwrap();
        assert_eq!(plain.verdict, relaxed.verdict, "seed {seed}");
        assert_eq!(plain.pattern, relaxed.pattern);
        match (plain.lp_value, relaxed.lp_value) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9),
            (a, b) => assert_eq!(a, b),
        }
    }
}

#[test]
fn relaxed_certificate_respects_the_box() {
    let tol = Tolerances::default();
    let mut checked = 0;
    for seed in 0..100 {
        let (phi, psi, x) = draw(seed);
        let inst = instance(phi.clone(), psi.clone(), &x);
        let plain = verify_condition1(&inst, &x, &tol).unwrap();
        let cos = &plain.pattern.cosupport;
        if cos.len() < 2 {
            continue;
        }
        let j = &cos[..cos.len() / 2 + 1];
        let pattern = plain.pattern.with_cosupport(j).unwrap();
        if let Some(c) = find_certificate(&phi, &psi, &pattern, &tol).unwrap().certificate() {
            checked += 1;
            assert!(norm_inf(&pick(&c.y, &pattern.boxed)) <= 1.0 + 1e-9, "seed {seed}");
            assert!(c.lp_value < 1.0);
        }
    }
    assert!(checked > 10);
}

#[test]
fn unique_verdict_means_basis_pursuit_recovers_the_point() {
    let tol = Tolerances::default();
    let mut unique = 0;
    for seed in 0..150 {
        let (phi, psi, x) = draw(seed);
        let inst = instance(phi.clone(), psi.clone(), &x);
        if verify_condition1(&inst, &x, &tol).unwrap().verdict != Verdict::Unique {
            continue;
        }
        unique += 1;
        let sol = solve_bp(&phi, &psi, &inst.b).unwrap();
        let err = norm2(&linalg::sub(&sol.x, &x));
        assert!(err < 1e-7 * (1.0 + norm2(&x)), "seed {seed}: ‖x_bp − x‖ = {err:e}");
    }
    assert!(unique > 30, "{unique} unique draws");
}

#[test]
fn pattern_rejects_bad_indices() {
    assert!(SupportPattern::new(3, vec![0, 0], vec![1.0, 1.0]).is_err());
    assert!(SupportPattern::new(3, vec![3], vec![1.0]).is_err());
    let p = SupportPattern::new(4, vec![1], vec![-1.0]).unwrap();
    assert_eq!(p.cosupport, vec![0, 2, 3]);
    assert!(p.with_cosupport(&[1]).is_err());
    let q = p.with_cosupport(&[0, 3]).unwrap();
    assert_eq!(q.boxed, vec![2]);
}
