//! Standard-form second-order cone programs and the solver behind them.
//!
//! Every optimization in this crate is phrased as
//!
//! ```text
//!     minimize    c'y
//!     subject to  E y = f
//!                 G y + s = h,   s ∈ K
//! ```
//!
//! where `K` is a product of nonnegative orthants and second-order (Lorentz)
//! cones, in the order given by [`ConicProgram::cone_layout`]. The backend is
//! Clarabel's primal-dual interior-point method, but [`solve`] does not take
//! the backend's word for anything: it re-measures the KKT residuals (or the
//! infeasibility certificate) of whatever comes back and only reports
//! [`SolveStatus::Optimal`] / an infeasibility status when the contract holds
//! at the caller's tolerance. Anything else is a [`SolveStatus::NumericalFailure`].
//!
//! Sign conventions, fixed here once for the whole crate:
//! * equality duals `u` and cone duals `z` satisfy stationarity
//!   `c + E'u + G'z = 0`, with `z` in the dual cone `K*`;
//! * the dual objective is `-(f'u + h'z)`, so at optimality
//!   `c'y + f'u + h'z ≈ 0`;
//! * a primal-infeasibility certificate is a pair `(u, z)` with
//!   `E'u + G'z ≈ 0`, `z ∈ K*` and `f'u + h'z < 0`;
//! * a dual-infeasibility certificate (improving ray) is a vector `y` with
//!   `E y ≈ 0`, `-G y ∈ K` and `c'y < 0`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

/// Default KKT tolerance τ; sweeps may loosen to 1e-6.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// One factor of the cone product `K`, covering a contiguous block of rows of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    NonnegativeOrthant(usize),
    /// Lorentz cone `{ s : s[0] >= ||s[1..]|| }`; the leading entry is the scalar bound.
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonnegativeOrthant(d) | Cone::SecondOrder(d) => d,
        }
    }
}

/// A cone program in the standard form described in the module docs.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub objective: DVector<f64>,
    pub eq_lhs: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub cone_lhs: DMatrix<f64>,
    pub cone_rhs: DVector<f64>,
    pub cone_layout: Vec<Cone>,
}

impl ConicProgram {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_cone_rows(&self) -> usize {
        self.cone_rhs.len()
    }

    /// Checks internal dimensional consistency.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.n_vars();
        if self.eq_lhs.ncols() != n || self.cone_lhs.ncols() != n {
            return Err(ProgramError::Shape(format!(
                "objective has {} entries but eq_lhs/cone_lhs have {}/{} columns",
                n,
                self.eq_lhs.ncols(),
                self.cone_lhs.ncols()
            )));
        }
        if self.eq_lhs.nrows() != self.eq_rhs.len() {
            return Err(ProgramError::Shape(format!(
                "eq_lhs has {} rows but eq_rhs has {} entries",
                self.eq_lhs.nrows(),
                self.eq_rhs.len()
            )));
        }
        if self.cone_lhs.nrows() != self.cone_rhs.len() {
            return Err(ProgramError::Shape(format!(
                "cone_lhs has {} rows but cone_rhs has {} entries",
                self.cone_lhs.nrows(),
                self.cone_rhs.len()
            )));
        }
        let cone_dim: usize = self.cone_layout.iter().map(Cone::dim).sum();
        if cone_dim != self.cone_rhs.len() {
            return Err(ProgramError::Shape(format!(
                "cone layout covers {} rows but cone_lhs has {}",
                cone_dim,
                self.cone_rhs.len()
            )));
        }
        if self.cone_layout.iter().any(|c| c.dim() == 0) {
            return Err(ProgramError::Shape("zero-dimensional cone".into()));
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.eq_lhs.iter().all(|v| v.is_finite())
            && self.eq_rhs.iter().all(|v| v.is_finite())
            && self.cone_lhs.iter().all(|v| v.is_finite())
            && self.cone_rhs.iter().all(|v| v.is_finite());
        if !finite {
            return Err(ProgramError::Shape("non-finite program data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("inconsistent program dimensions: {0}")]
    Shape(String),
    #[error("variable index {index} out of range for {n_vars} variables")]
    VariableOutOfRange { index: usize, n_vars: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

/// Solver output. Field meaning depends on `status`:
///
/// * `Optimal`: `primal` is `y`, `slacks` is `s` (cone rows only), `eq_duals`
///   is `u`, `cone_duals` is `z`, and all KKT residual bounds hold at the
///   tolerance passed to [`solve`].
/// * `PrimalInfeasible`: `eq_duals`/`cone_duals` hold the Farkas certificate
///   `(u, z)`; `primal`/`slacks` are meaningless.
/// * `DualInfeasible`: `primal` holds the improving ray; duals are meaningless.
/// * `NumericalFailure`: nothing is trustworthy; `violations` says why.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub primal: DVector<f64>,
    pub slacks: DVector<f64>,
    pub eq_duals: DVector<f64>,
    pub cone_duals: DVector<f64>,
    pub objective_value: f64,
    /// Contract violations found while checking the backend's answer.
    /// Empty unless `status == NumericalFailure`.
    pub violations: Vec<String>,
}

/// A linear expression `constant + Σ coeff·y[var]`, used to assemble rows.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Expr {
    pub fn var(index: usize) -> Self {
        Expr {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Expr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(mut self, index: usize, coeff: f64) -> Self {
        self.terms.push((index, coeff));
        self
    }

    pub fn plus_const(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn add(mut self, other: &Expr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn sub(mut self, other: &Expr) -> Self {
        for &(i, c) in &other.terms {
            self.terms.push((i, -c));
        }
        self.constant -= other.constant;
        self
    }

    pub fn scale(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(i, _)| i).max()
    }
}

/// Incrementally assembles a [`ConicProgram`] over a fixed variable count.
///
/// Rows are stored in call order; consecutive orthant rows are merged into a
/// single `NonnegativeOrthant` block so the layout stays compact.
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    n_vars: usize,
    objective: Vec<f64>,
    eq_rows: Vec<Expr>,
    cone_rows: Vec<Expr>,
    layout: Vec<Cone>,
}

impl ProgramBuilder {
    pub fn new(n_vars: usize) -> Self {
        ProgramBuilder {
            n_vars,
            objective: vec![0.0; n_vars],
            eq_rows: Vec::new(),
            cone_rows: Vec::new(),
            layout: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn objective_coeff(&mut self, index: usize, coeff: f64) {
        self.objective[index] += coeff;
    }

    /// Adds the equality `expr == 0`.
    pub fn add_eq(&mut self, expr: Expr) {
        self.check_expr(&expr);
        self.eq_rows.push(expr);
    }

    /// Adds the inequality `expr >= 0` as an orthant row.
    pub fn add_nonneg(&mut self, expr: Expr) {
        self.check_expr(&expr);
        self.cone_rows.push(expr);
        match self.layout.last_mut() {
            Some(Cone::NonnegativeOrthant(d)) => *d += 1,
            _ => self.layout.push(Cone::NonnegativeOrthant(1)),
        }
    }

    /// Adds `exprs[0] >= ||exprs[1..]||` as a second-order cone block.
    pub fn add_soc(&mut self, exprs: Vec<Expr>) {
        assert!(exprs.len() >= 2, "second-order cone needs at least 2 rows");
        for e in &exprs {
            self.check_expr(e);
        }
        self.layout.push(Cone::SecondOrder(exprs.len()));
        self.cone_rows.extend(exprs);
    }

    /// Adds the hyperbolic constraint `4·alpha·delta >= Σ v_i²` with
    /// `alpha, delta >= 0`, encoded as the cone `||(v, alpha - delta)|| <= alpha + delta`
    /// plus the two sign rows; `(α+δ)² − (α−δ)² = 4αδ` makes the two equivalent.
    /// Identically-zero vector entries are dropped: they leave the norm
    /// unchanged but would pin cone coordinates to the boundary, costing the
    /// interior-point backend its strictly feasible interior.
    pub fn add_hyperbolic(&mut self, alpha: Expr, delta: Expr, v: Vec<Expr>) {
        self.add_nonneg(alpha.clone());
        self.add_nonneg(delta.clone());
        let mut rows = Vec::with_capacity(v.len() + 2);
        rows.push(alpha.clone().add(&delta));
        rows.extend(
            v.into_iter()
                .filter(|e| e.constant != 0.0 || e.terms.iter().any(|&(_, c)| c != 0.0)),
        );
        rows.push(alpha.sub(&delta));
        self.add_soc(rows);
    }

    /// Index-based form of [`Self::add_hyperbolic`]: the constraint
    /// `4·y[alpha]·y[delta] >= Σ y[v_i]²`.
    pub fn rewrite_hyperbolic(
        &mut self,
        alpha: usize,
        delta: usize,
        v: &[usize],
    ) -> Result<(), ProgramError> {
        for &index in [alpha, delta].iter().chain(v.iter()) {
            if index >= self.n_vars {
                return Err(ProgramError::VariableOutOfRange {
                    index,
                    n_vars: self.n_vars,
                });
            }
        }
        self.add_hyperbolic(
            Expr::var(alpha),
            Expr::var(delta),
            v.iter().map(|&i| Expr::var(i)).collect(),
        );
        Ok(())
    }

    pub fn build(self) -> ConicProgram {
        let n = self.n_vars;
        let p = self.eq_rows.len();
        let m = self.cone_rows.len();
        let mut eq_lhs = DMatrix::zeros(p, n);
        let mut eq_rhs = DVector::zeros(p);
        for (r, row) in self.eq_rows.iter().enumerate() {
            // constant + a'y == 0  =>  a'y = -constant
            for &(i, c) in &row.terms {
                eq_lhs[(r, i)] += c;
            }
            eq_rhs[r] = -row.constant;
        }
        let mut cone_lhs = DMatrix::zeros(m, n);
        let mut cone_rhs = DVector::zeros(m);
        for (r, row) in self.cone_rows.iter().enumerate() {
            // s = constant + a'y  =>  (-a)'y + s = constant
            for &(i, c) in &row.terms {
                cone_lhs[(r, i)] -= c;
            }
            cone_rhs[r] = row.constant;
        }
        ConicProgram {
            objective: DVector::from_vec(self.objective),
            eq_lhs,
            eq_rhs,
            cone_lhs,
            cone_rhs,
            cone_layout: self.layout,
        }
    }

    fn check_expr(&self, expr: &Expr) {
        if let Some(max) = expr.max_index() {
            assert!(
                max < self.n_vars,
                "expression references variable {max}, program has {}",
                self.n_vars
            );
        }
    }
}

fn dense_to_csc(m: &DMatrix<f64>) -> CscMatrix<f64> {
    let (rows, cols) = m.shape();
    let mut colptr = Vec::with_capacity(cols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for j in 0..cols {
        for i in 0..rows {
            let v = m[(i, j)];
            if v != 0.0 {
                rowval.push(i);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, cols, colptr, rowval, nzval)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest amount by which `v` falls outside the cone product (0 when inside).
/// Self-dual cones, so the same test serves for `K` and `K*`.
fn cone_outage(layout: &[Cone], v: &DVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    let mut at = 0;
    for cone in layout {
        let d = cone.dim();
        match cone {
            Cone::NonnegativeOrthant(_) => {
                for i in at..at + d {
                    worst = worst.max(-v[i]);
                }
            }
            Cone::SecondOrder(_) => {
                let head = v[at];
                let tail = v.rows(at + 1, d - 1).norm();
                worst = worst.max(tail - head);
            }
        }
        at += d;
    }
    worst
}

/// Residual bounds an `Optimal` answer must satisfy at tolerance `tol`.
/// Returns every violated bound as a human-readable string.
pub fn kkt_violations(prog: &ConicProgram, sol: &ConicSolution, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let y = &sol.primal;
    let s = &sol.slacks;
    let u = &sol.eq_duals;
    let z = &sol.cone_duals;

    let eq_res = inf_norm(&(&prog.eq_lhs * y - &prog.eq_rhs));
    let eq_bound = tol * (1.0 + inf_norm(&prog.eq_rhs));
    if eq_res > eq_bound {
        out.push(format!("equality residual {eq_res:.3e} > {eq_bound:.3e}"));
    }

    let cone_res = inf_norm(&(&prog.cone_lhs * y + s - &prog.cone_rhs));
    let cone_bound = tol * (1.0 + inf_norm(&prog.cone_rhs));
    if cone_res > cone_bound {
        out.push(format!("cone residual {cone_res:.3e} > {cone_bound:.3e}"));
    }

    let scale_s = tol * (1.0 + inf_norm(s));
    let s_out = cone_outage(&prog.cone_layout, s);
    if s_out > scale_s {
        out.push(format!("slack outside cone by {s_out:.3e} > {scale_s:.3e}"));
    }
    let scale_z = tol * (1.0 + inf_norm(z));
    let z_out = cone_outage(&prog.cone_layout, z);
    if z_out > scale_z {
        out.push(format!("dual outside cone by {z_out:.3e} > {scale_z:.3e}"));
    }

    let gap = s.dot(z).abs();
    let gap_bound = tol * (1.0 + sol.objective_value.abs());
    if gap > gap_bound {
        out.push(format!("complementarity gap {gap:.3e} > {gap_bound:.3e}"));
    }

    let stat = inf_norm(&(&prog.objective
        + prog.eq_lhs.transpose() * u
        + prog.cone_lhs.transpose() * z));
    let stat_bound = tol * (1.0 + inf_norm(&prog.objective));
    if stat > stat_bound {
        out.push(format!("dual stationarity residual {stat:.3e} > {stat_bound:.3e}"));
    }

    out
}

/// Infeasibility-certificate bounds, per the sign conventions in the module docs.
pub fn certificate_violations(prog: &ConicProgram, sol: &ConicSolution, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    match sol.status {
        SolveStatus::PrimalInfeasible => {
            let margin = -(prog.eq_rhs.dot(&sol.eq_duals) + prog.cone_rhs.dot(&sol.cone_duals));
            if !(margin > 0.0) {
                out.push(format!("certificate margin {margin:.3e} not positive"));
                return out;
            }
            let u = &sol.eq_duals / margin;
            let z = &sol.cone_duals / margin;
            let scale = 1.0 + inf_norm(&u) + inf_norm(&z);
            let res = inf_norm(&(prog.eq_lhs.transpose() * &u + prog.cone_lhs.transpose() * &z));
            if res > tol * scale {
                out.push(format!(
                    "certificate residual {res:.3e} > {:.3e}",
                    tol * scale
                ));
            }
            let z_out = cone_outage(&prog.cone_layout, &z);
            if z_out > tol * scale {
                out.push(format!("certificate dual outside cone by {z_out:.3e}"));
            }
        }
        SolveStatus::DualInfeasible => {
            let margin = -prog.objective.dot(&sol.primal);
            if !(margin > 0.0) {
                out.push(format!("ray objective margin {margin:.3e} not positive"));
                return out;
            }
            let ray = &sol.primal / margin;
            let scale = 1.0 + inf_norm(&ray);
            let eq_res = inf_norm(&(&prog.eq_lhs * &ray));
            if eq_res > tol * scale {
                out.push(format!("ray equality residual {eq_res:.3e}"));
            }
            let dir = -(&prog.cone_lhs * &ray);
            let dir_out = cone_outage(&prog.cone_layout, &dir);
            if dir_out > tol * scale {
                out.push(format!("ray direction outside cone by {dir_out:.3e}"));
            }
        }
        _ => out.push("no certificate for this status".into()),
    }
    out
}

/// Solves `prog`, enforcing the KKT / certificate contract at `tolerance`.
///
/// The returned status is decided by re-measured residuals, not by the
/// backend's label; infeasibility is therefore always certificate-backed.
/// When the first solve misses the contract (degenerate optima at cone
/// boundaries can stall the backend just above it), one retry runs with
/// equilibration off and tighter targets before giving up.
pub fn solve(prog: &ConicProgram, tolerance: f64) -> Result<ConicSolution, ProgramError> {
    prog.validate()?;
    let inner_tol = (tolerance / 100.0).clamp(1e-12, 1e-10);
    let mut last = None;
    for equilibrate in [true, false] {
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(500)
            .tol_gap_abs(inner_tol)
            .tol_gap_rel(inner_tol)
            .tol_feas(inner_tol)
            .tol_infeas_abs(inner_tol)
            .tol_infeas_rel(inner_tol)
            .equilibrate_enable(equilibrate)
            .static_regularization_constant(1e-12)
            .iterative_refinement_reltol(1e-14)
            .iterative_refinement_abstol(1e-14)
            .build()
            .expect("static solver settings");
        let sol = solve_once(prog, settings, tolerance);
        if sol.status != SolveStatus::NumericalFailure {
            return Ok(sol);
        }
        last = Some(sol);
    }
    Ok(last.expect("at least one attempt"))
}

fn solve_once(
    prog: &ConicProgram,
    settings: clarabel::solver::DefaultSettings<f64>,
    tolerance: f64,
) -> ConicSolution {
    let n = prog.n_vars();
    let p = prog.n_eq();
    let m = prog.n_cone_rows();

    let p_mat = CscMatrix::new(n, n, vec![0; n + 1], vec![], vec![]);
    let q: Vec<f64> = prog.objective.iter().copied().collect();

    let mut a_dense = DMatrix::zeros(p + m, n);
    a_dense.rows_mut(0, p).copy_from(&prog.eq_lhs);
    a_dense.rows_mut(p, m).copy_from(&prog.cone_lhs);
    let a_mat = dense_to_csc(&a_dense);

    let mut b = Vec::with_capacity(p + m);
    b.extend(prog.eq_rhs.iter().copied());
    b.extend(prog.cone_rhs.iter().copied());

    let mut cones: Vec<SupportedConeT<f64>> = Vec::with_capacity(prog.cone_layout.len() + 1);
    if p > 0 {
        cones.push(SupportedConeT::ZeroConeT(p));
    }
    for cone in &prog.cone_layout {
        match *cone {
            Cone::NonnegativeOrthant(d) => cones.push(SupportedConeT::NonnegativeConeT(d)),
            // A 1-dimensional Lorentz cone is just { s >= 0 }.
            Cone::SecondOrder(1) => cones.push(SupportedConeT::NonnegativeConeT(1)),
            Cone::SecondOrder(d) => cones.push(SupportedConeT::SecondOrderConeT(d)),
        }
    }

    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings);
    solver.solve();
    let raw = &solver.solution;

    let primal = DVector::from_iterator(n, raw.x.iter().copied());
    let all_duals = DVector::from_iterator(p + m, raw.z.iter().copied());
    let all_slacks = DVector::from_iterator(p + m, raw.s.iter().copied());
    let eq_duals = all_duals.rows(0, p).into_owned();
    let cone_duals = all_duals.rows(p, m).into_owned();
    let slacks = all_slacks.rows(p, m).into_owned();
    let objective_value = prog.objective.dot(&primal);

    let mut sol = ConicSolution {
        status: SolveStatus::NumericalFailure,
        primal,
        slacks,
        eq_duals,
        cone_duals,
        objective_value,
        violations: Vec::new(),
    };

    match raw.status {
        SolverStatus::Solved
        | SolverStatus::AlmostSolved
        | SolverStatus::MaxIterations
        | SolverStatus::InsufficientProgress => {
            sol.status = SolveStatus::Optimal;
            let violations = kkt_violations(prog, &sol, tolerance);
            if !violations.is_empty() {
                sol.status = SolveStatus::NumericalFailure;
                sol.violations = violations;
            }
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            sol.status = SolveStatus::PrimalInfeasible;
            sol.objective_value = f64::NAN;
            let violations = certificate_violations(prog, &sol, tolerance);
            if !violations.is_empty() {
                sol.status = SolveStatus::NumericalFailure;
                sol.violations = violations;
            }
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            sol.status = SolveStatus::DualInfeasible;
            sol.objective_value = f64::NEG_INFINITY;
            let violations = certificate_violations(prog, &sol, tolerance);
            if !violations.is_empty() {
                sol.status = SolveStatus::NumericalFailure;
                sol.violations = violations;
            }
        }
        other => {
            sol.violations = vec![format!("backend terminated with {other:?}")];
        }
    }

    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_dimensional_lp() {
        // min y s.t. y >= 1
        let mut b = ProgramBuilder::new(1);
        b.objective_coeff(0, 1.0);
        b.add_nonneg(Expr::var(0).plus_const(-1.0));
        let sol = solve(&b.build(), 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.objective_value, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn norm_epigraph() {
        // min t s.t. ||(3, 4)|| <= t
        let mut b = ProgramBuilder::new(1);
        b.objective_coeff(0, 1.0);
        b.add_soc(vec![Expr::var(0), Expr::constant(3.0), Expr::constant(4.0)]);
        let sol = solve(&b.build(), 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.primal[0], 5.0, epsilon = 1e-6);
    }

    #[test]
    fn contradictory_bounds_give_certificate() {
        // y >= 1 and -y >= 0
        let mut b = ProgramBuilder::new(1);
        b.add_nonneg(Expr::var(0).plus_const(-1.0));
        b.add_nonneg(Expr::var(0).scale(-1.0));
        let prog = b.build();
        let sol = solve(&prog, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(certificate_violations(&prog, &sol, 1e-8).is_empty());
    }

    #[test]
    fn unbounded_below_gives_ray() {
        // min -y s.t. y >= 0
        let mut b = ProgramBuilder::new(1);
        b.objective_coeff(0, -1.0);
        b.add_nonneg(Expr::var(0));
        let prog = b.build();
        let sol = solve(&prog, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
        assert!(certificate_violations(&prog, &sol, 1e-8).is_empty());
    }

    fn hyperbolic_feasibility(alpha: f64, delta: f64, v: (f64, f64)) -> SolveStatus {
        let mut b = ProgramBuilder::new(4);
        b.add_eq(Expr::var(0).plus_const(-alpha));
        b.add_eq(Expr::var(1).plus_const(-delta));
        b.add_eq(Expr::var(2).plus_const(-v.0));
        b.add_eq(Expr::var(3).plus_const(-v.1));
        b.rewrite_hyperbolic(0, 1, &[2, 3]).unwrap();
        solve(&b.build(), 1e-8).unwrap().status
    }

    #[test]
    fn hyperbolic_boundary_and_violation() {
        // 4*1*1 = 4 = ||(2,0)||^2: boundary point, feasible
        assert_eq!(hyperbolic_feasibility(1.0, 1.0, (2.0, 0.0)), SolveStatus::Optimal);
        // degenerate alpha = 0 with v = 0
        assert_eq!(hyperbolic_feasibility(0.0, 5.0, (0.0, 0.0)), SolveStatus::Optimal);
        // 4*1*0 = 0 < 1 = ||(1,0)||^2
        assert_eq!(
            hyperbolic_feasibility(1.0, 0.0, (1.0, 0.0)),
            SolveStatus::PrimalInfeasible
        );
    }

    #[test]
    fn rewrite_hyperbolic_rejects_bad_index() {
        let mut b = ProgramBuilder::new(2);
        let err = b.rewrite_hyperbolic(0, 5, &[1]).unwrap_err();
        assert!(matches!(err, ProgramError::VariableOutOfRange { index: 5, .. }));
    }

    #[test]
    fn primal_and_dual_objectives_agree() {
        // min y0 + 2 y1 s.t. y0 + y1 = 1, y >= 0
        let mut b = ProgramBuilder::new(2);
        b.objective_coeff(0, 1.0);
        b.objective_coeff(1, 2.0);
        b.add_eq(Expr::var(0).term(1, 1.0).plus_const(-1.0));
        b.add_nonneg(Expr::var(0));
        b.add_nonneg(Expr::var(1));
        let prog = b.build();
        let sol = solve(&prog, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let dual_obj = -(prog.eq_rhs.dot(&sol.eq_duals) + prog.cone_rhs.dot(&sol.cone_duals));
        assert_abs_diff_eq!(sol.objective_value, dual_obj, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.objective_value, 1.0, epsilon = 1e-7);
    }
}
