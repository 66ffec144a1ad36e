//! Dense linear programming for the ∞-norm certificate programs.
//!
//! [`LinearProgram`] is a small general-form LP (bounded variables, `=`/`≤`/`≥`
//! rows) solved by a two-phase revised simplex. The basis matrix is
//! refactorized from scratch at every pivot, so basic solutions carry no
//! accumulated update error; this only scales to desk-sized problems.
//!
//! On top of it sit the programs used by the certificate search:
//!
//! * [`solve_inf_norm_eq`]: `min ‖u‖∞  s.t.  A u = u1`
//! * [`solve_inf_norm_box`]: `min max_{j∈free} |u_j|  s.t.  A u = u1, |u_k| ≤ 1 (k ∈ boxed)`
//! * [`dual_value`]: `max ⟨p, a⟩  s.t.  ‖Aᵀ p‖₁ ≤ 1`
//!
//! Every optimal answer carries an explicit dual vector and the gap between
//! the primal value and the dual objective that vector attains.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Phase-one residual above which the program is declared infeasible
    /// (relative to `1 + ‖rhs‖∞`).
    pub feas_tol: f64,
    /// Reduced costs below `-opt_tol` are considered improving.
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-11,
            pivot_tol: 1e-9,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// `min cᵀx` subject to linear rows and per-variable bounds.
///
/// Variables default to free (`-∞ < x_j < ∞`).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row, for the Lagrangian `cᵀx − Σ yᵢ (aᵢᵀx − bᵢ)`.
    /// Empty unless the status is optimal.
    pub row_duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            cost: vec![0.0; n_vars],
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.cost[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n_vars(), "row length must equal the variable count");
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Adds a row from sparse `(variable, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.n_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add_row(coeffs, rel, rhs);
    }

    pub fn solve(&self, opts: &SimplexOptions) -> Result<LpOutcome> {
        for j in 0..self.n_vars() {
            if self.lower[j] > self.upper[j] {
                return Ok(LpOutcome {
                    status: LpStatus::Infeasible,
                    x: Vec::new(),
                    objective: f64::INFINITY,
                    row_duals: Vec::new(),
                    iterations: 0,
                });
            }
        }
        let std = StandardForm::build(self);
        let out = simplex(&std.a, &std.b, &std.c, opts)?;
        let status = out.status;
        if status != LpStatus::Optimal {
            return Ok(LpOutcome {
                status,
                x: Vec::new(),
                objective: if status == LpStatus::Infeasible {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                row_duals: Vec::new(),
                iterations: out.iterations,
            });
        }
        let x = std.recover(&out.x);
        let objective = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        let row_duals = (0..self.rows.len())
            .map(|i| std.row_flip[i] * out.y[i])
            .collect();
        Ok(LpOutcome {
            status,
            x,
            objective,
            row_duals,
            iterations: out.iterations,
        })
    }
}

enum VarMap {
    /// `x = offset + sign * x'`, `x' ≥ 0`
    Shift { col: usize, offset: f64, sign: f64 },
    /// `x = x⁺ − x⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    vars: Vec<VarMap>,
    row_flip: Vec<f64>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let mut vars = Vec::with_capacity(n);
        let mut ncols = 0;
        let mut bound_rows = Vec::new();
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            if lo.is_finite() {
                vars.push(VarMap::Shift {
                    col: ncols,
                    offset: lo,
                    sign: 1.0,
                });
                if hi.is_finite() {
                    bound_rows.push((ncols, hi - lo));
                }
                ncols += 1;
            } else if hi.is_finite() {
                vars.push(VarMap::Shift {
                    col: ncols,
                    offset: hi,
                    sign: -1.0,
                });
                ncols += 1;
            } else {
                vars.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
        let n_slack = lp.rows.iter().filter(|r| r.rel != Relation::Eq).count() + bound_rows.len();
        let m = lp.rows.len() + bound_rows.len();
        let total = ncols + n_slack;
        let mut a = DMatrix::zeros(m, total);
        let mut b = DVector::zeros(m);
        let mut c = DVector::zeros(total);
        for (j, map) in vars.iter().enumerate() {
            match *map {
                VarMap::Shift { col, sign, .. } => c[col] = sign * lp.cost[j],
                VarMap::Split { pos, neg } => {
                    c[pos] = lp.cost[j];
                    c[neg] = -lp.cost[j];
                }
            }
        }
        let mut slack = ncols;
        let mut row_flip = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let mut rhs = row.rhs;
            for (j, map) in vars.iter().enumerate() {
                let coef = row.coeffs[j];
                if coef == 0.0 {
                    continue;
                }
                match *map {
                    VarMap::Shift { col, offset, sign } => {
                        a[(i, col)] += sign * coef;
                        rhs -= coef * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        a[(i, pos)] += coef;
                        a[(i, neg)] -= coef;
                    }
                }
            }
            match row.rel {
                Relation::Eq => {}
                Relation::Le => {
                    a[(i, slack)] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    a[(i, slack)] = -1.0;
                    slack += 1;
                }
            }
            b[i] = rhs;
            row_flip.push(1.0);
        }
        for (k, &(col, width)) in bound_rows.iter().enumerate() {
            let i = lp.rows.len() + k;
            a[(i, col)] = 1.0;
            a[(i, slack)] = 1.0;
            slack += 1;
            b[i] = width;
            row_flip.push(1.0);
        }
        for i in 0..m {
            if b[i] < 0.0 {
                b[i] = -b[i];
                a.row_mut(i).neg_mut();
                row_flip[i] = -1.0;
            }
        }
        Self {
            a,
            b,
            c,
            vars,
            row_flip,
        }
    }

    fn recover(&self, xs: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|map| match *map {
                VarMap::Shift { col, offset, sign } => offset + sign * xs[col],
                VarMap::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect()
    }
}

struct StdOutcome {
    status: LpStatus,
    x: Vec<f64>,
    y: Vec<f64>,
    iterations: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    /// `[A | I]`: structural columns followed by one artificial per row.
    a: DMatrix<f64>,
    b: &'a DVector<f64>,
    n_struct: usize,
    basis: Vec<usize>,
    opts: &'a SimplexOptions,
    iterations: usize,
}

impl Simplex<'_> {
    fn basis_matrix(&self) -> DMatrix<f64> {
        self.a.select_columns(&self.basis)
    }

    fn basic_solution(&self, bm: &DMatrix<f64>) -> Result<DVector<f64>> {
        bm.clone().lu().solve(self.b).ok_or_else(|| Error::NotConverged {
            iterations: self.iterations,
            residual: f64::NAN,
        })
    }

    fn duals(&self, bm: &DMatrix<f64>, cost: &DVector<f64>) -> Result<DVector<f64>> {
        let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
        bm.transpose().lu().solve(&cb).ok_or_else(|| Error::NotConverged {
            iterations: self.iterations,
            residual: f64::NAN,
        })
    }

    /// Runs simplex pivots for `cost`; only columns `< allowed` may enter.
    fn run(&mut self, cost: &DVector<f64>, allowed: usize) -> Result<Phase> {
        let m = self.basis.len();
        let cmax = cost.amax().max(1.0);
        let mut bland = false;
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations >= self.opts.max_iter {
                return Err(Error::NotConverged {
                    iterations: self.iterations,
                    residual: f64::NAN,
                });
            }
            let bm = self.basis_matrix();
            let lu = bm.clone().lu();
            let xb = lu.solve(self.b).ok_or_else(|| Error::NotConverged {
                iterations: self.iterations,
                residual: f64::NAN,
            })?;
            let y = self.duals(&bm, cost)?;
            let mut in_basis = vec![false; self.a.ncols()];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let mut entering = None;
            let mut best = -self.opts.opt_tol * cmax;
            for j in 0..allowed {
                if in_basis[j] {
                    continue;
                }
                let d = cost[j] - self.a.column(j).dot(&y);
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(Phase::Optimal);
            };
            let dq = lu.solve(&self.a.column(q).into_owned()).ok_or_else(|| Error::NotConverged {
                iterations: self.iterations,
                residual: f64::NAN,
            })?;
            let mut min_ratio = f64::INFINITY;
            for i in 0..m {
                if dq[i] > self.opts.pivot_tol {
                    min_ratio = min_ratio.min(xb[i].max(0.0) / dq[i]);
                }
            }
            if !min_ratio.is_finite() {
                return Ok(Phase::Unbounded);
            }
            let slack = 1e-12 * (1.0 + min_ratio);
            let mut leave: Option<usize> = None;
            for i in 0..m {
                if dq[i] <= self.opts.pivot_tol || xb[i].max(0.0) / dq[i] > min_ratio + slack {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(r) if bland && self.basis[i] < self.basis[r] => Some(i),
                    Some(r) if !bland && dq[i] > dq[r] => Some(i),
                    keep => keep,
                };
            }
            let r = leave.expect("a candidate row exists when the ratio is finite");
            if min_ratio <= 1e-12 {
                degenerate_streak += 1;
                if degenerate_streak > 50 {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
            }
            self.basis[r] = q;
            self.iterations += 1;
        }
    }

    /// Replaces artificial basic variables by structural ones where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.basis.len() {
            if self.basis[r] < self.n_struct {
                continue;
            }
            let bm = self.basis_matrix();
            let mut e = DVector::zeros(self.basis.len());
            e[r] = 1.0;
            let Some(row) = bm.transpose().lu().solve(&e) else {
                continue;
            };
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_struct {
                if self.basis.contains(&j) {
                    continue;
                }
                let v = self.a.column(j).dot(&row).abs();
                if v > 1e-9 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.basis[r] = j;
                self.iterations += 1;
            }
        }
        Ok(())
    }
}

fn simplex(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>, opts: &SimplexOptions) -> Result<StdOutcome> {
    let (m, n) = a.shape();
    if m == 0 {
        // No rows: x = 0 is optimal unless some cost is negative.
        let status = if c.iter().any(|&cj| cj < 0.0) {
            LpStatus::Unbounded
        } else {
            LpStatus::Optimal
        };
        return Ok(StdOutcome {
            status,
            x: vec![0.0; n],
            y: Vec::new(),
            iterations: 0,
        });
    }
    let mut ext = DMatrix::zeros(m, n + m);
    ext.view_mut((0, 0), (m, n)).copy_from(a);
    for i in 0..m {
        ext[(i, n + i)] = 1.0;
    }
    let mut sx = Simplex {
        a: ext,
        b,
        n_struct: n,
        basis: (n..n + m).collect(),
        opts,
        iterations: 0,
    };

    let mut phase1_cost = DVector::zeros(n + m);
    for i in 0..m {
        phase1_cost[n + i] = 1.0;
    }
    sx.run(&phase1_cost, n + m)?;
    let xb = sx.basic_solution(&sx.basis_matrix())?;
    let infeasibility: f64 = sx
        .basis
        .iter()
        .zip(xb.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, v)| v.abs())
        .sum();
    if infeasibility > opts.feas_tol * (1.0 + b.amax()) {
        return Ok(StdOutcome {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            y: Vec::new(),
            iterations: sx.iterations,
        });
    }
    sx.drive_out_artificials()?;

    let mut cost = DVector::zeros(n + m);
    cost.rows_mut(0, n).copy_from(c);
    match sx.run(&cost, n)? {
        Phase::Unbounded => Ok(StdOutcome {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            y: Vec::new(),
            iterations: sx.iterations,
        }),
        Phase::Optimal => {
            let bm = sx.basis_matrix();
            let xb = sx.basic_solution(&bm)?;
            let y = sx.duals(&bm, &cost)?;
            let mut x = vec![0.0; n];
            for (&j, &v) in sx.basis.iter().zip(xb.iter()) {
                if j < n {
                    x[j] = v.max(0.0);
                }
            }
            Ok(StdOutcome {
                status: LpStatus::Optimal,
                x,
                y: y.iter().copied().collect(),
                iterations: sx.iterations,
            })
        }
    }
}

/// Tolerances for the ∞-norm certificate programs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    /// Allowed `‖A u − u1‖∞ / (1 + ‖u1‖∞)` at an optimal point.
    pub feas_tol: f64,
    /// Allowed `(primal − dual) / (1 + primal)`.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            gap_tol: 1e-8,
            max_iter: 20_000,
        }
    }
}

impl LpOptions {
    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            feas_tol: self.feas_tol,
            max_iter: self.max_iter,
            ..SimplexOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Minimizer (empty unless optimal).
    pub u: Vec<f64>,
    /// `max_{j∈free} |u_j|`; `+∞` when infeasible.
    pub value: f64,
    /// Multiplier `p` for `A u = u1`, feasible for the dual program.
    pub dual: Vec<f64>,
    /// Primal value minus the dual objective attained by `dual`.
    pub duality_gap: f64,
    /// For infeasible programs: `q` with `(Aᵀq)_free = 0`, `|q| ≤ 1` and
    /// `qᵀu1 − Σ_{boxed} |(Aᵀq)_k| > 0`.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

/// `min ‖u‖∞  s.t.  A u = u1`.
pub fn solve_inf_norm_eq(a: &DenseMatrix, u1: &[f64], opts: &LpOptions) -> Result<LpSolution> {
    let free: Vec<usize> = (0..a.ncols()).collect();
    solve_inf_norm_box(a, u1, &free, &[], opts)
}

/// `min max_{j∈free} |u_j|  s.t.  A u = u1,  |u_k| ≤ 1 for k ∈ boxed`.
pub fn solve_inf_norm_box(
    a: &DenseMatrix,
    u1: &[f64],
    free: &[usize],
    boxed: &[usize],
    opts: &LpOptions,
) -> Result<LpSolution> {
    let (k, n) = a.shape();
    if k != u1.len() {
        return Err(Error::DimensionMismatch(format!(
            "constraint matrix has {k} rows but right-hand side has length {}",
            u1.len()
        )));
    }
    check_partition(n, free, boxed)?;

    // Variables: u_0..u_{n-1}, then the epigraph variable t.
    let t = n;
    let mut lp = LinearProgram::new(n + 1);
    lp.set_cost(t, 1.0);
    lp.set_bounds(t, 0.0, f64::INFINITY);
    for &j in boxed {
        lp.set_bounds(j, -1.0, 1.0);
    }
    for i in 0..k {
        let mut row = a.row(i);
        row.push(0.0);
        lp.add_row(row, Relation::Eq, u1[i]);
    }
    for &j in free {
        lp.add_sparse_row(&[(j, 1.0), (t, -1.0)], Relation::Le, 0.0);
        lp.add_sparse_row(&[(j, -1.0), (t, -1.0)], Relation::Le, 0.0);
    }
    let out = lp.solve(&opts.simplex())?;
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            let farkas = box_farkas(a, u1, free, boxed, opts)?;
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                u: Vec::new(),
                value: f64::INFINITY,
                dual: Vec::new(),
                duality_gap: f64::NAN,
                farkas,
                iterations: out.iterations,
            });
        }
        // The objective is bounded below by zero.
        LpStatus::Unbounded => unreachable!("∞-norm program cannot be unbounded"),
    }

    let u: Vec<f64> = out.x[..n].to_vec();
    let value = free.iter().fold(0.0f64, |m, &j| m.max(u[j].abs()));
    let residual = norm_inf(&crate::linalg::sub(&a.mul_vec(&u)?, u1));
    if residual > opts.feas_tol * (1.0 + norm_inf(u1)) {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual,
        });
    }
    let p: Vec<f64> = out.row_duals[..k].to_vec();
    let (p, dual_obj) = box_dual_objective(a, u1, free, boxed, p)?;
    let duality_gap = value - dual_obj;
    if duality_gap.abs() > opts.gap_tol * (1.0 + value) {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            residual: duality_gap,
        });
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        u,
        value,
        dual: p,
        duality_gap,
        farkas: None,
        iterations: out.iterations,
    })
}

fn check_partition(n: usize, free: &[usize], boxed: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &j in free.iter().chain(boxed) {
        if j >= n {
            return Err(Error::InvalidInput(format!("index {j} out of range for {n} columns")));
        }
        if seen[j] {
            return Err(Error::InvalidInput(format!("index {j} listed twice")));
        }
        seen[j] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidInput(
            "free and boxed indices must cover every column".into(),
        ));
    }
    Ok(())
}

/// Scales `p` into the dual feasible set `Σ_free |(Aᵀp)_j| ≤ 1` and returns
/// it with the dual objective `⟨p, u1⟩ − Σ_boxed |(Aᵀp)_k|`.
fn box_dual_objective(
    a: &DenseMatrix,
    u1: &[f64],
    free: &[usize],
    boxed: &[usize],
    mut p: Vec<f64>,
) -> Result<(Vec<f64>, f64)> {
    let atp = a.tr_mul_vec(&p)?;
    let used: f64 = free.iter().map(|&j| atp[j].abs()).sum();
    let scale = if used > 1.0 { 1.0 / used } else { 1.0 };
    p.iter_mut().for_each(|v| *v *= scale);
    let boxed_penalty: f64 = boxed.iter().map(|&k| scale * atp[k].abs()).sum();
    let obj = crate::linalg::dot(&p, u1) - boxed_penalty;
    Ok((p, obj))
}

/// Separating vector for an infeasible box program, found by maximizing
/// `⟨q, u1⟩ − Σ_boxed |(Aᵀq)_k|` over `(Aᵀq)_free = 0`, `‖q‖∞ ≤ 1`.
fn box_farkas(
    a: &DenseMatrix,
    u1: &[f64],
    free: &[usize],
    boxed: &[usize],
    opts: &LpOptions,
) -> Result<Option<Vec<f64>>> {
    let k = a.nrows();
    let nb = boxed.len();
    let mut lp = LinearProgram::new(k + nb);
    for i in 0..k {
        lp.set_bounds(i, -1.0, 1.0);
        lp.set_cost(i, -u1[i]);
    }
    for s in 0..nb {
        lp.set_bounds(k + s, 0.0, f64::INFINITY);
        lp.set_cost(k + s, 1.0);
    }
    let at = a.transpose();
    for &j in free {
        let mut row = at.row(j);
        row.extend(std::iter::repeat_n(0.0, nb));
        lp.add_row(row, Relation::Eq, 0.0);
    }
    for (s, &kk) in boxed.iter().enumerate() {
        let col = at.row(kk);
        let mut pos = col.clone();
        pos.extend(std::iter::repeat_n(0.0, nb));
        pos[k + s] = -1.0;
        lp.add_row(pos, Relation::Le, 0.0);
        let mut neg: Vec<f64> = col.iter().map(|v| -v).collect();
        neg.extend(std::iter::repeat_n(0.0, nb));
        neg[k + s] = -1.0;
        lp.add_row(neg, Relation::Le, 0.0);
    }
    let out = lp.solve(&opts.simplex())?;
    if out.status == LpStatus::Optimal && out.objective < -opts.feas_tol {
        Ok(Some(out.x[..k].to_vec()))
    } else {
        Ok(None)
    }
}

/// Optimal value of `max ⟨p, a⟩  s.t.  ‖Aᵀ p‖₁ ≤ 1`, the dual of
/// [`solve_inf_norm_eq`]. An unbounded dual means the primal is infeasible.
pub fn dual_value(a_mat: &DenseMatrix, a: &[f64], opts: &LpOptions) -> Result<f64> {
    let (k, n) = a_mat.shape();
    if k != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {k} rows but objective has length {}",
            a.len()
        )));
    }
    // Variables: p_0..p_{k-1} free, s_0..s_{n-1} ≥ 0 with |(Aᵀp)_j| ≤ s_j.
    let mut lp = LinearProgram::new(k + n);
    for i in 0..k {
        lp.set_cost(i, -a[i]);
    }
    for j in 0..n {
        lp.set_bounds(k + j, 0.0, f64::INFINITY);
    }
    let at = a_mat.transpose();
    for j in 0..n {
        let col = at.row(j);
        let mut pos = col.clone();
        pos.extend(std::iter::repeat_n(0.0, n));
        pos[k + j] = -1.0;
        lp.add_row(pos, Relation::Le, 0.0);
        let mut neg: Vec<f64> = col.iter().map(|v| -v).collect();
        neg.extend(std::iter::repeat_n(0.0, n));
        neg[k + j] = -1.0;
        lp.add_row(neg, Relation::Le, 0.0);
    }
    let budget: Vec<(usize, f64)> = (0..n).map(|j| (k + j, 1.0)).collect();
    lp.add_sparse_row(&budget, Relation::Le, 1.0);
    let out = lp.solve(&opts.simplex())?;
    match out.status {
        LpStatus::Optimal => Ok(-out.objective),
        LpStatus::Unbounded => Err(Error::Unbounded(
            "dual program unbounded: the primal constraint system is infeasible".into(),
        )),
        LpStatus::Infeasible => unreachable!("p = 0 is always dual feasible"),
    }
}
