//! The dual side of the design problem.
//!
//! By Lagrangian duality, σ(θ) ≥ 1 holds exactly when the dual variables
//! (α, β, ε, δ) of the separability program admit a point of the feasible set
//!
//! ```text
//!     Σ_k β_k'·theta_map_k·θ − ε_k'·ineq_rhs_k − δ_k  >=  1          (margin)
//!     α_0 + α_1 = 1
//!     Σ_k meas_map_k'·β_k + ineq_lhs_k'·ε_k = 0
//!     4 α_k δ_k >= ||noise_map_k'·β_k||²,   α_k >= 0,  ε_k >= 0
//! ```
//!
//! which turns the bilevel constraint "1 ≤ σ(θ)" into a single-level — but
//! bilinear — constraint in (β, θ). The bilinear term splits into a concave
//! and a convex quadratic through the symmetric embedding
//! `Ψ = [0, Θ; Θ', 0]` of the signal map:
//!
//! ```text
//!     β'Θθ = ¼ v'(Ψ − ψI)v + ¼ v'(Ψ + ψI)v,      v = [β; θ],
//! ```
//!
//! with ψ the largest eigenvalue of Ψ (equivalently the largest singular
//! value of Θ), so `Ψ + ψI ⪰ 0` and `Ψ − ψI ⪯ 0`. The convex part sits on
//! the wrong side of the margin inequality and is replaced by its tangent
//! [`linearize_convex_part`] inside the convex-concave iteration; the tangent
//! is exact at the anchor and a global under-estimator everywhere else.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::conic::{self, ConicProgram, ConicSolution, Expr, ProgramBuilder, SolveStatus};
use crate::model::DesignProblem;

/// Half-width of the σ = 1 decision band: within it, either separability
/// answer is accepted.
pub const SEPARATION_BAND: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DualError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cone solver failed: {0}")]
    Solver(String),
}

/// Symmetric embedding of a signal map together with its extreme eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    /// Block anti-diagonal `[0, Θ; Θ', 0]`.
    pub psi_matrix: DMatrix<f64>,
    /// Largest eigenvalue of `psi_matrix` (= largest singular value of Θ).
    pub psi_max: f64,
}

pub fn eigen_split(theta_map: &DMatrix<f64>) -> EigenSplit {
    let (rows, cols) = theta_map.shape();
    let dim = rows + cols;
    let mut psi = DMatrix::zeros(dim, dim);
    psi.view_mut((0, rows), (rows, cols)).copy_from(theta_map);
    psi.view_mut((rows, 0), (cols, rows))
        .copy_from(&theta_map.transpose());
    let psi_max = if dim == 0 {
        0.0
    } else {
        psi.symmetric_eigenvalues().max()
    };
    EigenSplit {
        psi_matrix: psi,
        // the spectrum of the embedding is ± the singular values of Θ
        psi_max: psi_max.max(0.0),
    }
}

fn stack(beta: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(beta.len() + theta.len());
    v.rows_mut(0, beta.len()).copy_from(beta);
    v.rows_mut(beta.len(), theta.len()).copy_from(theta);
    v
}

/// Splits the bilinear form `β'Θθ` into its concave and convex quadratic
/// halves; the two always sum back to the bilinear value.
pub fn bilinear_identity(
    split: &EigenSplit,
    beta: &DVector<f64>,
    theta: &DVector<f64>,
) -> (f64, f64) {
    let v = stack(beta, theta);
    assert_eq!(
        v.len(),
        split.psi_matrix.nrows(),
        "stacked (beta, theta) does not match the split dimension"
    );
    let quad = v.dot(&(&split.psi_matrix * &v));
    let trace_term = split.psi_max * v.norm_squared();
    (0.25 * (quad - trace_term), 0.25 * (quad + trace_term))
}

/// Tangent of the convex half at an anchor, as an affine form in (β, θ).
#[derive(Debug, Clone)]
pub struct LinearSurrogate {
    pub constant: f64,
    pub beta_grad: DVector<f64>,
    pub theta_grad: DVector<f64>,
}

impl LinearSurrogate {
    pub fn evaluate(&self, beta: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        self.constant + self.beta_grad.dot(beta) + self.theta_grad.dot(theta)
    }
}

/// First-order expansion of `¼ v'(Ψ + ψI)v` at `v_z = [beta_z; theta_z]`:
/// exact at the anchor and a global under-estimator of the convex part.
pub fn linearize_convex_part(
    split: &EigenSplit,
    beta_z: &DVector<f64>,
    theta_z: &DVector<f64>,
) -> LinearSurrogate {
    let v_z = stack(beta_z, theta_z);
    assert_eq!(v_z.len(), split.psi_matrix.nrows());
    // gradient ½ (Ψ + ψI) v_z; J(v) = g'v − ¼ v_z'(Ψ + ψI)v_z
    let grad = (&split.psi_matrix * &v_z + &v_z * split.psi_max) * 0.5;
    let constant = -0.25 * (v_z.dot(&(&split.psi_matrix * &v_z)) + split.psi_max * v_z.norm_squared());
    LinearSurrogate {
        constant,
        beta_grad: grad.rows(0, beta_z.len()).into_owned(),
        theta_grad: grad.rows(beta_z.len(), theta_z.len()).into_owned(),
    }
}

/// Where each dual variable group lives in a program's variable vector.
#[derive(Debug, Clone, Copy)]
struct DualLayout {
    alpha: [usize; 2],
    delta: [usize; 2],
    beta: [(usize, usize); 2],
    epsilon: [(usize, usize); 2],
}

impl DualLayout {
    /// Lays the groups out starting at `base`; returns the next free index.
    fn new(problem: &DesignProblem, base: usize) -> (Self, usize) {
        let e0 = problem.normal.eq_dim();
        let e1 = problem.faulty.eq_dim();
        let m0 = problem.normal.n_ineq();
        let m1 = problem.faulty.n_ineq();
        let layout = DualLayout {
            alpha: [base, base + 1],
            delta: [base + 2, base + 3],
            beta: [(base + 4, e0), (base + 4 + e0, e1)],
            epsilon: [(base + 4 + e0 + e1, m0), (base + 4 + e0 + e1 + m0, m1)],
        };
        (layout, base + 4 + e0 + e1 + m0 + m1)
    }
}

/// One point of the dual feasible set.
#[derive(Debug, Clone)]
pub struct DualVariables {
    pub alpha: [f64; 2],
    pub beta: [DVector<f64>; 2],
    pub epsilon: [DVector<f64>; 2],
    pub delta: [f64; 2],
}

impl DualVariables {
    /// Checks this point against the dual feasibility conditions; returns the
    /// violated ones.
    pub fn violations(&self, problem: &DesignProblem) -> Vec<String> {
        let mut out = Vec::new();
        if (self.alpha[0] + self.alpha[1] - 1.0).abs() > 1e-8 {
            out.push(format!(
                "alpha sum {} differs from 1",
                self.alpha[0] + self.alpha[1]
            ));
        }
        for (k, model) in [&problem.normal, &problem.faulty].iter().enumerate() {
            let v = model.noise_map.transpose() * &self.beta[k];
            if 4.0 * self.alpha[k] * self.delta[k] < v.norm_squared() - 1e-8 {
                out.push(format!(
                    "hyperbolic condition violated for model {k}: 4αδ = {}, ||H'β||² = {}",
                    4.0 * self.alpha[k] * self.delta[k],
                    v.norm_squared()
                ));
            }
            if self.epsilon[k].iter().any(|&e| e < -1e-10) {
                out.push(format!("epsilon of model {k} has negative entries"));
            }
            if self.alpha[k] < -1e-10 {
                out.push(format!("alpha of model {k} is negative"));
            }
        }
        out
    }

    /// Value of the dual objective (the margin expression) at this point.
    pub fn margin(&self, problem: &DesignProblem, theta: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for (k, model) in [&problem.normal, &problem.faulty].iter().enumerate() {
            total += self.beta[k].dot(&(&model.theta_map * theta));
            total -= self.epsilon[k].dot(&model.ineq_rhs);
            total -= self.delta[k];
        }
        total
    }
}

fn check_theta(problem: &DesignProblem, theta: &DVector<f64>) -> Result<(), DualError> {
    if theta.len() != problem.signal_dim() {
        return Err(DualError::Dimension(format!(
            "signal has {} entries, models expect {}",
            theta.len(),
            problem.signal_dim()
        )));
    }
    Ok(())
}

/// Emits the dual feasibility block (normalization, stationarity over the
/// measurement, hyperbolic cones, sign constraints) into `b`.
fn add_dual_feasibility(b: &mut ProgramBuilder, problem: &DesignProblem, layout: &DualLayout) {
    b.add_eq(
        Expr::var(layout.alpha[0])
            .term(layout.alpha[1], 1.0)
            .plus_const(-1.0),
    );
    let n_x = problem.meas_dim();
    for j in 0..n_x {
        let mut e = Expr::default();
        for (k, model) in [&problem.normal, &problem.faulty].iter().enumerate() {
            let (b_start, b_len) = layout.beta[k];
            for i in 0..b_len {
                let c = model.meas_map[(i, j)];
                if c != 0.0 {
                    e = e.term(b_start + i, c);
                }
            }
            let (e_start, e_len) = layout.epsilon[k];
            for r in 0..e_len {
                let c = model.ineq_lhs[(r, j)];
                if c != 0.0 {
                    e = e.term(e_start + r, c);
                }
            }
        }
        b.add_eq(e);
    }
    for (k, model) in [&problem.normal, &problem.faulty].iter().enumerate() {
        let (e_start, e_len) = layout.epsilon[k];
        for r in 0..e_len {
            b.add_nonneg(Expr::var(e_start + r));
        }
        let (b_start, b_len) = layout.beta[k];
        let v = (0..model.noise_dim())
            .map(|j| {
                let mut e = Expr::default();
                for i in 0..b_len {
                    let c = model.noise_map[(i, j)];
                    if c != 0.0 {
                        e = e.term(b_start + i, c);
                    }
                }
                e
            })
            .collect();
        b.add_hyperbolic(Expr::var(layout.alpha[k]), Expr::var(layout.delta[k]), v);
    }
}

/// The margin expression `Σ_k (Θ_k θ)'β_k − ineq_rhs_k'ε_k − δ_k`.
fn margin_expr(problem: &DesignProblem, theta: &DVector<f64>, layout: &DualLayout) -> Expr {
    let mut e = Expr::default();
    for (k, model) in [&problem.normal, &problem.faulty].iter().enumerate() {
        let weights = &model.theta_map * theta;
        let (b_start, b_len) = layout.beta[k];
        for i in 0..b_len {
            if weights[i] != 0.0 {
                e = e.term(b_start + i, weights[i]);
            }
        }
        let (e_start, e_len) = layout.epsilon[k];
        for r in 0..e_len {
            if model.ineq_rhs[r] != 0.0 {
                e = e.term(e_start + r, -model.ineq_rhs[r]);
            }
        }
        e = e.term(layout.delta[k], -1.0);
    }
    e
}

/// The fixed-signal feasibility program: σ(θ) ≥ 1 exactly when it is feasible.
#[derive(Debug, Clone)]
pub struct FixedThetaProgram {
    pub program: ConicProgram,
    layout: DualLayout,
}

impl FixedThetaProgram {
    pub fn extract(&self, problem: &DesignProblem, sol: &ConicSolution) -> DualVariables {
        extract_duals(problem, &self.layout, &sol.primal)
    }
}

fn extract_duals(
    problem: &DesignProblem,
    layout: &DualLayout,
    primal: &DVector<f64>,
) -> DualVariables {
    let take = |(start, len): (usize, usize)| primal.rows(start, len).into_owned();
    let _ = problem;
    DualVariables {
        alpha: [primal[layout.alpha[0]], primal[layout.alpha[1]]],
        beta: [take(layout.beta[0]), take(layout.beta[1])],
        epsilon: [take(layout.epsilon[0]), take(layout.epsilon[1])],
        delta: [primal[layout.delta[0]], primal[layout.delta[1]]],
    }
}

/// Builds the feasibility program over (α, β, ε, δ) with the signal fixed,
/// which makes the bilinear margin constraint linear.
pub fn build_fixed_theta_program(
    problem: &DesignProblem,
    theta: &DVector<f64>,
) -> Result<FixedThetaProgram, DualError> {
    check_theta(problem, theta)?;
    let (layout, n_vars) = DualLayout::new(problem, 0);
    let mut b = ProgramBuilder::new(n_vars);
    add_dual_feasibility(&mut b, problem, &layout);
    b.add_nonneg(margin_expr(problem, theta, &layout).plus_const(-1.0));
    Ok(FixedThetaProgram {
        program: b.build(),
        layout,
    })
}

/// Supremum of the dual margin at a fixed signal, which equals σ(θ) by strong
/// duality; `f64::INFINITY` when the margin is unbounded (the separability
/// program is then infeasible and any signal separates).
pub fn separability_margin(
    problem: &DesignProblem,
    theta: &DVector<f64>,
    tolerance: f64,
) -> Result<f64, DualError> {
    check_theta(problem, theta)?;
    let (layout, n_vars) = DualLayout::new(problem, 0);
    let mut b = ProgramBuilder::new(n_vars);
    add_dual_feasibility(&mut b, problem, &layout);
    for (i, c) in margin_expr(problem, theta, &layout).terms {
        b.objective_coeff(i, -c);
    }
    let sol = conic::solve(&b.build(), tolerance).map_err(|e| DualError::Solver(e.to_string()))?;
    match sol.status {
        SolveStatus::Optimal => Ok(-sol.objective_value),
        SolveStatus::DualInfeasible => Ok(f64::INFINITY),
        SolveStatus::PrimalInfeasible => Err(DualError::Solver(
            "dual feasible set reported empty; it never is".into(),
        )),
        SolveStatus::NumericalFailure => Err(DualError::Solver(sol.violations.join("; "))),
    }
}

/// Whether the signal makes the two models distinguishable, decided through
/// the dual route. Within the σ = 1 band of width [`SEPARATION_BAND`] either
/// answer is acceptable; the threshold sits at the low edge of the band so a
/// design verified at σ ≈ 1 tests separable.
pub fn check_separability(problem: &DesignProblem, theta: &DVector<f64>) -> Result<bool, DualError> {
    check_separability_with_tolerance(problem, theta, conic::DEFAULT_TOLERANCE)
}

/// The margin maximization decides first; when it fails numerically (its
/// optimum can sit on a degenerate face, e.g. at θ = 0), the fixed-signal
/// feasibility program decides instead — far from the σ = 1 band that one is
/// cleanly feasible or certificate-backed infeasible.
pub fn check_separability_with_tolerance(
    problem: &DesignProblem,
    theta: &DVector<f64>,
    tolerance: f64,
) -> Result<bool, DualError> {
    let margin_route = separability_margin(problem, theta, tolerance)
        .map(|m| m >= 1.0 - SEPARATION_BAND);
    match margin_route {
        Ok(answer) => Ok(answer),
        Err(margin_err) => {
            let probe = build_fixed_theta_program(problem, theta)?;
            let sol = conic::solve(&probe.program, tolerance)
                .map_err(|e| DualError::Solver(e.to_string()))?;
            match sol.status {
                SolveStatus::Optimal => Ok(true),
                SolveStatus::PrimalInfeasible => Ok(false),
                _ => Err(margin_err),
            }
        }
    }
}

/// One convex-concave iteration's subproblem, plus the bookkeeping needed to
/// pull the next iterate out of its solution.
#[derive(Debug, Clone)]
pub struct CcpSubproblem {
    pub program: ConicProgram,
    layout: DualLayout,
    theta_start: usize,
    epigraph: usize,
    xi: usize,
}

/// The part of a subproblem solution the iteration carries forward.
#[derive(Debug, Clone)]
pub struct CcpIterate {
    pub theta: DVector<f64>,
    pub beta_normal: DVector<f64>,
    pub beta_faulty: DVector<f64>,
    /// Slack on the linearized margin constraint.
    pub xi: f64,
    /// Epigraph value of the quadratic cost.
    pub cost_epigraph: f64,
}

impl CcpSubproblem {
    pub fn extract(&self, problem: &DesignProblem, sol: &ConicSolution) -> CcpIterate {
        let duals = extract_duals(problem, &self.layout, &sol.primal);
        let [beta_normal, beta_faulty] = duals.beta;
        CcpIterate {
            theta: sol.primal.rows(self.theta_start, problem.signal_dim()).into_owned(),
            beta_normal,
            beta_faulty,
            xi: sol.primal[self.xi],
            cost_epigraph: sol.primal[self.epigraph],
        }
    }

    pub fn dual_variables(&self, problem: &DesignProblem, sol: &ConicSolution) -> DualVariables {
        extract_duals(problem, &self.layout, &sol.primal)
    }
}

/// Symmetric square root of a (nominally) PSD matrix, with eigenvalues inside
/// the tolerance clamped at zero.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Builds the penalized convex subproblem at the anchor `(theta_z, beta_z)`:
///
/// ```text
///     min  t + gamma·ξ
///     s.t. θ'(cost)θ <= t,   ξ >= 0,
///          1 − ξ <= Σ_k [ ¼ v_k'(Ψ_k − ψ_k I)v_k + J_k(β_k, θ) ]
///                       − ineq_rhs_k'ε_k − δ_k,         v_k = [β_k; θ],
///          dual feasibility of (α, β, ε, δ)
/// ```
///
/// where `J_k` is the tangent of the convex half of each bilinear term at the
/// anchor while the concave half is kept exactly (it is the right way up for
/// this inequality, and moving it to the left side leaves a second-order cone
/// constraint since `ψ_k I − Ψ_k ⪰ 0`). Tangency makes the surrogate margin
/// agree with the true margin at the anchor, and minorization makes every
/// surrogate-feasible point truly feasible, which is what drives the descent
/// of the penalized objective across iterations. The slack ξ lets infeasible
/// anchors start the iteration.
pub fn build_ccp_subproblem(
    problem: &DesignProblem,
    theta_z: &DVector<f64>,
    beta_normal_z: &DVector<f64>,
    beta_faulty_z: &DVector<f64>,
    gamma: f64,
) -> Result<CcpSubproblem, DualError> {
    check_theta(problem, theta_z)?;
    if beta_normal_z.len() != problem.normal.eq_dim()
        || beta_faulty_z.len() != problem.faulty.eq_dim()
    {
        return Err(DualError::Dimension(format!(
            "anchor beta lengths {}/{} do not match model equation counts {}/{}",
            beta_normal_z.len(),
            beta_faulty_z.len(),
            problem.normal.eq_dim(),
            problem.faulty.eq_dim()
        )));
    }
    if !(gamma > 0.0) {
        return Err(DualError::Dimension(format!(
            "penalty weight must be positive, got {gamma}"
        )));
    }

    let n_t = problem.signal_dim();
    let theta_start = 0;
    let epigraph = n_t;
    let xi = n_t + 1;
    let (layout, n_vars) = DualLayout::new(problem, n_t + 2);
    let mut b = ProgramBuilder::new(n_vars);
    b.objective_coeff(epigraph, 1.0);
    b.objective_coeff(xi, gamma);

    // θ'(cost)θ <= t through the factor R of cost = R'R:
    // 4·1·t >= ||2Rθ||² is exactly t >= ||Rθ||².
    let root = psd_sqrt(&problem.cost);
    let rows = (0..n_t)
        .map(|j| {
            let mut e = Expr::default();
            for c in 0..n_t {
                let v = 2.0 * root[(j, c)];
                if v != 0.0 {
                    e = e.term(theta_start + c, v);
                }
            }
            e
        })
        .collect();
    b.add_hyperbolic(Expr::constant(1.0), Expr::var(epigraph), rows);

    b.add_nonneg(Expr::var(xi));
    add_dual_feasibility(&mut b, problem, &layout);

    // surrogate margin: Σ_k [concave_k + J_k] − ε_k'b_k − δ_k >= 1 − ξ.
    // The affine part (J_k, multipliers, slack) accumulates in `room`; the
    // kept concave quadratics move to the left as Σ_k ||S_k v_k||² <= room
    // with S_k the square root of (ψ_k I − Ψ_k)/4.
    let mut room = Expr::var(xi).plus_const(-1.0);
    let mut concave_rows: Vec<Expr> = Vec::new();
    for (k, (model, beta_z)) in [
        (&problem.normal, beta_normal_z),
        (&problem.faulty, beta_faulty_z),
    ]
    .iter()
    .enumerate()
    {
        let split = eigen_split(&model.theta_map);
        let surrogate = linearize_convex_part(&split, beta_z, theta_z);
        room = room.plus_const(surrogate.constant);
        let (b_start, b_len) = layout.beta[k];
        for i in 0..b_len {
            if surrogate.beta_grad[i] != 0.0 {
                room = room.term(b_start + i, surrogate.beta_grad[i]);
            }
        }
        for c in 0..n_t {
            if surrogate.theta_grad[c] != 0.0 {
                room = room.term(theta_start + c, surrogate.theta_grad[c]);
            }
        }
        let (e_start, e_len) = layout.epsilon[k];
        for r in 0..e_len {
            if model.ineq_rhs[r] != 0.0 {
                room = room.term(e_start + r, -model.ineq_rhs[r]);
            }
        }
        room = room.term(layout.delta[k], -1.0);

        let dim = split.psi_matrix.nrows();
        let factor = psd_sqrt(
            &((DMatrix::identity(dim, dim) * split.psi_max - &split.psi_matrix) * 0.25),
        );
        for r in 0..dim {
            // v_k stacks β_k then θ; scale by 2 for the hyperbolic map below
            let mut e = Expr::default();
            for i in 0..b_len {
                let c = 2.0 * factor[(r, i)];
                if c != 0.0 {
                    e = e.term(b_start + i, c);
                }
            }
            for c in 0..n_t {
                let v = 2.0 * factor[(r, b_len + c)];
                if v != 0.0 {
                    e = e.term(theta_start + c, v);
                }
            }
            concave_rows.push(e);
        }
    }
    // 4·1·room >= ||2 S v||² is exactly ||S v||² <= room
    b.add_hyperbolic(Expr::constant(1.0), room, concave_rows);

    Ok(CcpSubproblem {
        program: b.build(),
        layout,
        theta_start,
        epigraph,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StaticModel;
    use crate::sigma::tests::scalar_pair;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn eigen_split_scalar() {
        let s = eigen_split(&dmatrix![1.0]);
        assert_eq!(s.psi_matrix, dmatrix![0.0, 1.0; 1.0, 0.0]);
        assert_abs_diff_eq!(s.psi_max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_split_zero_map() {
        let s = eigen_split(&DMatrix::zeros(2, 3));
        assert_abs_diff_eq!(s.psi_max, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_split_diagonal_map() {
        // singular values {3, 4}, so the extreme eigenvalue is 4
        let s = eigen_split(&dmatrix![3.0, 0.0; 0.0, 4.0]);
        assert_abs_diff_eq!(s.psi_max, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn split_is_psd_and_nsd() {
        let s = eigen_split(&dmatrix![1.0, -2.0; 0.5, 3.0]);
        let dim = s.psi_matrix.nrows();
        let plus = &s.psi_matrix + DMatrix::identity(dim, dim) * s.psi_max;
        let minus = &s.psi_matrix - DMatrix::identity(dim, dim) * s.psi_max;
        assert!(plus.symmetric_eigenvalues().min() >= -1e-9 * s.psi_max);
        assert!(minus.symmetric_eigenvalues().max() <= 1e-9 * s.psi_max);
    }

    #[test]
    fn bilinear_identity_scalar_case() {
        let s = eigen_split(&dmatrix![1.0]);
        let (concave, convex) = bilinear_identity(&s, &dvector![2.0], &dvector![3.0]);
        assert_abs_diff_eq!(concave, -0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(convex, 6.25, epsilon = 1e-12);
        assert_abs_diff_eq!(concave + convex, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn bilinear_identity_zero_beta() {
        let s = eigen_split(&dmatrix![1.0]);
        let (concave, convex) = bilinear_identity(&s, &dvector![0.0], &dvector![3.0]);
        assert_abs_diff_eq!(concave, -0.25 * 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(convex, 0.25 * 9.0, epsilon = 1e-12);
        let (c0, v0) = bilinear_identity(&s, &dvector![0.0], &dvector![0.0]);
        assert_eq!((c0, v0), (0.0, 0.0));
    }

    #[test]
    fn surrogate_is_tangent_at_anchor() {
        let s = eigen_split(&dmatrix![1.0, -2.0; 0.5, 3.0; 0.0, 1.0]);
        let beta_z = dvector![0.3, -1.0, 2.0];
        let theta_z = dvector![1.0, 0.5];
        let j = linearize_convex_part(&s, &beta_z, &theta_z);
        let (_, convex) = bilinear_identity(&s, &beta_z, &theta_z);
        assert_abs_diff_eq!(j.evaluate(&beta_z, &theta_z), convex, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_at_zero_anchor_vanishes() {
        let s = eigen_split(&dmatrix![2.0]);
        let j = linearize_convex_part(&s, &dvector![0.0], &dvector![0.0]);
        assert_eq!(j.evaluate(&dvector![3.0], &dvector![-1.0]), 0.0);
    }

    #[test]
    fn surrogate_under_estimates() {
        let s = eigen_split(&dmatrix![1.0]);
        let j = linearize_convex_part(&s, &dvector![2.0], &dvector![3.0]);
        let at = j.evaluate(&dvector![1.0], &dvector![1.0]);
        assert_abs_diff_eq!(at, -1.25, epsilon = 1e-12);
        let (_, convex) = bilinear_identity(&s, &dvector![1.0], &dvector![1.0]);
        assert!(at <= convex + 1e-12);
    }

    #[test]
    fn fixed_theta_feasibility_tracks_sigma() {
        let p = scalar_pair();
        let feasible = build_fixed_theta_program(&p, &dvector![2.0]).unwrap();
        let sol = conic::solve(&feasible.program, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let duals = feasible.extract(&p, &sol);
        assert!(duals.violations(&p).is_empty());
        assert!(duals.margin(&p, &dvector![2.0]) >= 1.0 - 1e-7);

        let infeasible = build_fixed_theta_program(&p, &dvector![0.5]).unwrap();
        let sol = conic::solve(&infeasible.program, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    }

    #[test]
    fn identical_models_never_separate() {
        let m = StaticModel::unconstrained(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let p = DesignProblem::new(m.clone(), m, dmatrix![1.0]);
        let prog = build_fixed_theta_program(&p, &dvector![0.0]).unwrap();
        let sol = conic::solve(&prog.program, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(!check_separability(&p, &dvector![3.0]).unwrap());
    }

    #[test]
    fn margin_equals_sigma() {
        let p = scalar_pair();
        assert_abs_diff_eq!(
            separability_margin(&p, &dvector![2.0], 1e-8).unwrap(),
            4.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            separability_margin(&p, &dvector![0.5], 1e-8).unwrap(),
            0.25,
            epsilon = 1e-6
        );
        assert!(check_separability(&p, &dvector![2.0]).unwrap());
        assert!(!check_separability(&p, &dvector![0.5]).unwrap());
        assert!(!check_separability(&p, &dvector![0.0]).unwrap());
    }

    #[test]
    fn margin_unbounded_when_no_shared_scenario_exists() {
        // Conflicting range conditions make the separability program
        // infeasible at θ = 1, so the dual margin is unbounded.
        let normal = StaticModel::unconstrained(
            dmatrix![0.0; 1.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0; 0.0],
        );
        let faulty = StaticModel::unconstrained(
            dmatrix![0.0; 2.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0; 0.0],
        );
        let p = DesignProblem::new(normal, faulty, dmatrix![1.0]);
        let margin = separability_margin(&p, &dvector![1.0], 1e-8).unwrap();
        assert!(margin.is_infinite());
        assert!(check_separability(&p, &dvector![1.0]).unwrap());
    }

    #[test]
    fn subproblem_from_zero_anchor_on_identical_models_keeps_slack() {
        let m = StaticModel::unconstrained(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let p = DesignProblem::new(m.clone(), m, dmatrix![1.0]);
        let sub = build_ccp_subproblem(&p, &dvector![0.0], &dvector![0.0], &dvector![0.0], 50.0)
            .unwrap();
        // solved at the driver's subproblem tolerance: the optimum sits on a
        // degenerate face where certification-grade residuals are unattainable
        let sol = conic::solve(&sub.program, 1e-6).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let it = sub.extract(&p, &sol);
        // zero anchor makes every surrogate vanish, so ξ cannot drop below 1
        assert!(it.xi >= 1.0 - 1e-6);
    }

    #[test]
    fn subproblem_at_feasible_anchor_does_not_exceed_anchor_cost() {
        let p = scalar_pair();
        // (θ, β) = (2, (2, -2)) supports a feasible dual point with margin 4
        let sub = build_ccp_subproblem(&p, &dvector![2.0], &dvector![2.0], &dvector![-2.0], 10.0)
            .unwrap();
        let sol = conic::solve(&sub.program, 1e-6).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective_value <= 4.0 + 1e-6);
    }

    #[test]
    fn large_penalty_drives_slack_to_zero_when_separable() {
        let p = scalar_pair();
        let sub = build_ccp_subproblem(&p, &dvector![1.0], &dvector![0.0], &dvector![0.0], 1e6)
            .unwrap();
        let sol = conic::solve(&sub.program, 1e-6).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let it = sub.extract(&p, &sol);
        assert!(it.xi < 1e-6);
    }

    #[test]
    fn subproblem_rejects_bad_anchor_dims() {
        let p = scalar_pair();
        let err =
            build_ccp_subproblem(&p, &dvector![1.0], &dvector![0.0, 0.0], &dvector![0.0], 1.0);
        assert!(err.is_err());
    }
}
