mod common;

use common::*;
use l1cert::linalg::{self, norm1, norm2};
use l1cert::solvers::*;
use l1cert::DenseMatrix;
use rand::Rng;

/// FISTA on `min ‖Aw − b‖² + λ‖w‖₁`; slow, but a plain proximal method.
fn fista(a: &DenseMatrix, b: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let n = a.ncols();
    let lip = 2.0 * a.spectral_norm().powi(2);
    let step = 1.0 / lip;
    let mut w = vec![0.0; n];
    let mut v = w.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let r = linalg::sub(&a.mul_vec(&v).unwrap(), b);
        let g = a.tr_mul_vec(&r).unwrap();
        let w_new: Vec<f64> = (0..n)
            .map(|i| {
                let u = v[i] - step * 2.0 * g[i];
                u.signum() * (u.abs() - step * lambda).max(0.0)
            })
            .collect();
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        v = (0..n).map(|i| w_new[i] + (t - 1.0) / t_new * (w_new[i] - w[i])).collect();
        w = w_new;
        t = t_new;
    }
    w
}

#[test]
fn lasso_matches_proximal_oracle() {
    for seed in 0..6 {
        let mut r = rng(seed);
        let phi = gaussian(&mut r, 4, 6);
        let psi = if seed % 2 == 0 { DenseMatrix::identity(6) } else { orthogonal(&mut r, 6) };
        let b = gaussian_vec(&mut r, 4);
        let lambda = 0.3 + r.random::<f64>();
        let sol = solve_lasso(&phi, &psi, &b, lambda).unwrap();
        assert!(sol.converged && sol.kkt_residual <= SOLVER_TOL);
        // With Ψ orthogonal, x = Ψw turns the problem into a plain lasso in w.
        let a = phi.mul(&psi).unwrap();
        let w = fista(&a, &b, lambda, 200_000);
        let x_oracle = psi.mul_vec(&w).unwrap();
        let oracle_obj = lasso_objective(&phi, &psi, &b, lambda, &x_oracle);
        assert!((sol.objective - oracle_obj).abs() <= 1e-6, "seed {seed}: {} vs {oracle_obj}", sol.objective);
        assert!((sol.objective - lasso_objective(&phi, &psi, &b, lambda, &sol.x)).abs() <= 1e-12);
    }
}

#[test]
fn lasso_is_locally_minimal() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let (m, n) = (3 + seed as usize % 3, 6);
        let l = if seed % 2 == 0 { n } else { n + 2 };
        let phi = gaussian(&mut r, m, n);
        let psi = gaussian(&mut r, n, l);
        let b = gaussian_vec(&mut r, m);
        let lambda = 0.1 + r.random::<f64>();
        let sol = solve_lasso(&phi, &psi, &b, lambda).unwrap();
        let f0 = lasso_objective(&phi, &psi, &b, lambda, &sol.x);
        for _ in 0..100 {
            let d = unit_vec(&mut r, n);
            let xt: Vec<f64> = sol.x.iter().zip(&d).map(|(x, d)| x + 1e-4 * d).collect();
            assert!(lasso_objective(&phi, &psi, &b, lambda, &xt) >= f0 - 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn bp_beats_feasible_points() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let (m, n) = (3 + seed as usize % 4, 8);
        let phi = gaussian(&mut r, m, n);
        let psi = if seed % 2 == 0 { DenseMatrix::identity(n) } else { gaussian(&mut r, n, n + 3) };
        let x_feas0 = gaussian_vec(&mut r, n);
        let b = phi.mul_vec(&x_feas0).unwrap();
        let sol = solve_bp(&phi, &psi, &b).unwrap();
        assert!(sol.converged, "seed {seed}: kkt {}", sol.kkt_residual);
        assert!(norm2(&linalg::sub(&phi.mul_vec(&sol.x).unwrap(), &b)) <= 1e-9);
        let q = linalg::nullspace_basis(&phi, None).unwrap();
        for _ in 0..50 {
            let c = gaussian_vec(&mut r, q.ncols());
            let x_feas: Vec<f64> = x_feas0.iter().zip(q.mul_vec(&c).unwrap()).map(|(a, b)| a + b).collect();
            assert!(sol.objective <= analysis_l1(&psi, &x_feas) + 1e-8);
        }
    }
}

#[test]
fn bp_three_atom_example_against_line_search() {
    let phi = rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    let psi = rows(&[&[10.5, 1.0, 10.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
    let sol = solve_bp(&phi, &psi, &[-1.0, -10.0]).unwrap();
    // Feasible set is the line x = (t, -1, -10).
    let f = |t: f64| analysis_l1(&psi, &[t, -1.0, -10.0]);
    let best = (-200_000..=200_000)
        .map(|k| k as f64 * 1e-4)
        .map(f)
        .fold(f64::INFINITY, f64::min);
    assert!((sol.objective - best).abs() <= 1e-6);
}

#[test]
fn bpdn_constraint_is_active_and_optimal() {
    for seed in 0..15 {
        let mut r = rng(300 + seed);
        let (m, n) = (4, 7);
        let phi = gaussian(&mut r, m, n);
        let psi = if seed % 3 == 0 { DenseMatrix::identity(n) } else { orthogonal(&mut r, n) };
        let x_star = sparse_vec(&mut r, n, 2);
        let x_star = psi.mul_vec(&x_star).unwrap();
        let noise = unit_vec(&mut r, m);
        let b: Vec<f64> = phi.mul_vec(&x_star).unwrap().iter().zip(&noise).map(|(a, e)| a + 0.05 * e).collect();
        let delta = 0.05 + 0.2 * r.random::<f64>();
        let sol = solve_bpdn(&phi, &psi, &b, delta).unwrap();
        assert!(sol.converged, "seed {seed}");
        let res = norm2(&linalg::sub(&phi.mul_vec(&sol.x).unwrap(), &b));
        if norm1(&sol.x) > 0.0 {
            assert!((res - delta).abs() <= 1e-9, "seed {seed}: residual {res} vs {delta}");
        }
        // Feasible competitors: x* itself when δ covers the noise, and
        // shifts of the solution along Ker(Φ).
        if delta >= 0.05 {
            assert!(sol.objective <= analysis_l1(&psi, &x_star) + 1e-9);
        }
        let q = linalg::nullspace_basis(&phi, None).unwrap();
        for _ in 0..30 {
            let c = gaussian_vec(&mut r, q.ncols());
            let xf: Vec<f64> = sol.x.iter().zip(q.mul_vec(&c).unwrap()).map(|(a, b)| a + 0.1 * b).collect();
            assert!(sol.objective <= analysis_l1(&psi, &xf) + 1e-9);
        }
        // The penalty found must give the same point back through the lasso.
        let lam = sol.lambda.unwrap();
        let lasso = solve_lasso(&phi, &psi, &b, lam).unwrap();
        let res_l = norm2(&linalg::sub(&phi.mul_vec(&lasso.x).unwrap(), &b));
        assert!((res_l - delta).abs() <= 1e-8);
    }
}

#[test]
fn oracle_witnesses_are_optimal() {
    // Degenerate instances built from small integer matrices are often
    // non-unique.
    let mut found_non_unique = 0;
    for seed in 0..60 {
        let mut r = rng(400 + seed);
        let (m, n) = (2, 4);
        let data: Vec<f64> = (0..m * n).map(|_| r.random_range(-1i32..=1) as f64).collect();
        let phi = DenseMatrix::from_row_major(m, n, data).unwrap();
        if linalg::rank(&phi, None).unwrap() < m {
            continue;
        }
        let b: Vec<f64> = (0..m).map(|_| r.random_range(-2i32..=2) as f64).collect();
        let psi = DenseMatrix::identity(n);
        let sol = solve_bp(&phi, &psi, &b).unwrap();
        let v = uniqueness_oracle(&phi, &psi, &b, sol.objective).unwrap();
        if let Some((p, q)) = &v.witness_pair {
            found_non_unique += 1;
            for w in [p, q] {
                assert!(norm2(&linalg::sub(&phi.mul_vec(w).unwrap(), &b)) <= ORACLE_TOL);
                assert!((analysis_l1(&psi, w) - sol.objective).abs() <= ORACLE_TOL * (1.0 + sol.objective));
            }
            if !v.ambiguous {
                assert!(linalg::norm2(&linalg::sub(p, q)) > 1e-6);
            }
        }
    }
    assert!(found_non_unique > 0);
}

#[test]
fn residual_and_objective_constant_over_solution_sets() {
    for seed in 0..8 {
        let mut r = rng(500 + seed);
        let (m, n) = (3, 5);
        // Repeated columns make the lasso and BPDN solution sets non-trivial.
        let base = gaussian(&mut r, m, n - 1);
        let mut cols: Vec<Vec<f64>> = (0..n - 1).map(|j| base.col(j)).collect();
        cols.push(cols[0].clone());
        let phi = DenseMatrix::from_rows(&(0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect::<Vec<_>>()).unwrap();
        let psi = DenseMatrix::identity(n);
        let b = gaussian_vec(&mut r, m);
        for model in [NoisyModel::Lasso { lambda: 0.2 }, NoisyModel::Bpdn { delta: 0.1 }] {
            let p = solution_set_probe(&phi, &psi, &b, model, 5, seed).unwrap();
            assert!(p.max_residual_spread <= 10.0 * SOLVER_TOL, "{model:?}: {}", p.max_residual_spread);
            assert!(p.max_objective_spread <= 10.0 * SOLVER_TOL, "{model:?}: {}", p.max_objective_spread);
        }
    }
}
