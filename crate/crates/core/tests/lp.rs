mod common;

use common::{gaussian, gaussian_vec, rng};
use l1cert::lp::{self, LinearProgram, LpOptions, LpStatus, Relation, SimplexOptions};
use l1cert::DenseMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Brute-force `min cᵀx  s.t.  Gx ≤ h` by solving every n-subset of rows as
/// equalities; the caller keeps the polyhedron bounded.
fn vertex_min(c: &[f64], g: &[Vec<f64>], h: &[f64]) -> Option<f64> {
    let n = c.len();
    let rows = g.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let sys = DMatrix::from_fn(n, n, |i, j| g[idx[i]][j]);
        let rhs = DVector::from_fn(n, |i, _| h[idx[i]]);
        if let Some(x) = sys.lu().solve(&rhs) {
            let feasible = (0..rows).all(|r| g[r].iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() <= h[r] + 1e-9);
            if feasible {
                let v: f64 = c.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Next combination.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < rows - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut optimal = 0;
    for seed in 0..300 {
        let mut r = rng(seed);
        let n = r.random_range(1..=3);
        let extra = r.random_range(0..=4);
        let c = gaussian_vec(&mut r, n);
        // Box rows keep the feasible set bounded.
        let mut g: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<f64> = Vec::new();
        for j in 0..n {
            for s in [1.0, -1.0] {
                let mut row = vec![0.0; n];
                row[j] = s;
                g.push(row);
                h.push(r.random_range(0.5..4.0));
            }
        }
        for _ in 0..extra {
            g.push(gaussian_vec(&mut r, n));
            h.push(r.random_range(-1.0..2.0));
        }
        let mut prog = LinearProgram::new(n);
        for (j, &cj) in c.iter().enumerate() {
            prog.set_cost(j, cj);
        }
        for (row, &hi) in g.iter().zip(&h) {
            prog.add_row(row.clone(), Relation::Le, hi);
        }
        let out = prog.solve(&SimplexOptions::default()).unwrap();
        match vertex_min(&c, &g, &h) {
            None => assert_eq!(out.status, LpStatus::Infeasible, "seed {seed}"),
            Some(v) => {
                optimal += 1;
                assert_eq!(out.status, LpStatus::Optimal, "seed {seed}");
                assert!((out.objective - v).abs() < 1e-8 * (1.0 + v.abs()), "seed {seed}: {} vs {v}", out.objective);
                // Stationarity c = Σ yᵢ gᵢ with yᵢ ≤ 0 on ≤ rows, and strong duality.
                let y = &out.row_duals;
                for j in 0..n {
                    let s: f64 = g.iter().zip(y).map(|(row, yi)| row[j] * yi).sum();
                    assert!((s - c[j]).abs() < 1e-8, "seed {seed}");
                }
                assert!(y.iter().all(|&yi| yi <= 1e-9), "seed {seed}: {y:?}");
                let dual: f64 = y.iter().zip(&h).map(|(a, b)| a * b).sum();
                assert!((dual - out.objective).abs() < 1e-8 * (1.0 + v.abs()), "seed {seed}");
            }
        }
    }
    assert!(optimal > 150);
}

#[test]
fn detects_unbounded_and_infeasible() {
    let mut prog = LinearProgram::new(2);
    prog.set_cost(0, -1.0);
    prog.set_bounds(1, 0.0, 1.0);
    prog.add_row(vec![1.0, -1.0], Relation::Ge, 0.0);
    assert_eq!(prog.solve(&SimplexOptions::default()).unwrap().status, LpStatus::Unbounded);

    let mut prog = LinearProgram::new(2);
    prog.add_row(vec![1.0, 1.0], Relation::Le, 1.0);
    prog.add_row(vec![1.0, 1.0], Relation::Ge, 2.0);
    assert_eq!(prog.solve(&SimplexOptions::default()).unwrap().status, LpStatus::Infeasible);

    let mut prog = LinearProgram::new(1);
    prog.set_bounds(0, 1.0, 0.0);
    assert_eq!(prog.solve(&SimplexOptions::default()).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn equality_rows_and_bounds() {
    // min x + 2y  s.t.  x + y = 3, 0 ≤ x ≤ 2, y ≥ 0  →  x = 2, y = 1.
    let mut prog = LinearProgram::new(2);
    prog.set_cost(0, 1.0);
    prog.set_cost(1, 2.0);
    prog.set_bounds(0, 0.0, 2.0);
    prog.set_bounds(1, 0.0, f64::INFINITY);
    prog.add_sparse_row(&[(0, 1.0), (1, 1.0)], Relation::Eq, 3.0);
    let out = prog.solve(&SimplexOptions::default()).unwrap();
    assert_eq!(out.status, LpStatus::Optimal);
    assert!((out.x[0] - 2.0).abs() < 1e-12 && (out.x[1] - 1.0).abs() < 1e-12);
    assert!((out.objective - 4.0).abs() < 1e-12);
}

#[test]
fn inf_norm_program_hand_values() {
    // min ‖u‖∞ s.t. u₁ + u₂ = 1 gives u = (½, ½).
    let a = common::rows(&[&[1.0, 1.0]]);
    let sol = lp::solve_inf_norm_eq(&a, &[1.0], &LpOptions::default()).unwrap();
    assert!((sol.value - 0.5).abs() < 1e-12);
    assert!((lp::dual_value(&a, &[1.0], &LpOptions::default()).unwrap() - 0.5).abs() < 1e-12);

    // Boxing u₁ to [−1, 1] with u₁ + u₂ = 3 forces u₂ ≥ 2.
    let sol = lp::solve_inf_norm_box(&a, &[3.0], &[1], &[0], &LpOptions::default()).unwrap();
    assert!((sol.value - 2.0).abs() < 1e-12);
    let sol = lp::solve_inf_norm_box(&common::rows(&[&[1.0, 0.0]]), &[3.0], &[1], &[0], &LpOptions::default()).unwrap();
    assert_eq!(sol.status, LpStatus::Infeasible);
    let q = sol.farkas.expect("infeasibility certificate");
    assert!(q[0] * 3.0 - q[0].abs() > 0.0);
}

#[test]
fn inf_norm_strong_duality_on_wide_systems() {
    for seed in 0..100 {
        let mut r = rng(900 + seed);
        let n = r.random_range(4..=20);
        let k = r.random_range(1..n);
        let a: DenseMatrix = gaussian(&mut r, k, n);
        let u1 = gaussian_vec(&mut r, k);
        let sol = lp::solve_inf_norm_eq(&a, &u1, &LpOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let dv = lp::dual_value(&a, &u1, &LpOptions::default()).unwrap();
        assert!((sol.value - dv).abs() <= 1e-8 * (1.0 + sol.value), "seed {seed}");
        assert!(sol.duality_gap.abs() <= 1e-8 * (1.0 + sol.value));
        let res = l1cert::linalg::sub(&a.mul_vec(&sol.u).unwrap(), &u1);
        assert!(l1cert::linalg::norm_inf(&res) <= 1e-9 * (1.0 + l1cert::linalg::norm_inf(&u1)));
        assert!((l1cert::linalg::norm_inf(&sol.u) - sol.value).abs() < 1e-12);
    }
}
