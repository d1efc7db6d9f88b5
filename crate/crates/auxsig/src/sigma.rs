//! The separability measure and the which-model-explains-the-data decision.
//!
//! For a fixed auxiliary signal θ, the separability program asks for the
//! smallest ω such that a *single* measurement vector x together with noises
//! λ_0, λ_1 of squared norm at most ω satisfies both models simultaneously:
//!
//! ```text
//!     σ(θ) = min  ω
//!            over x, ω, λ_0, λ_1
//!            s.t. theta_map_k·θ + meas_map_k·x = noise_map_k·λ_k
//!                 ineq_lhs_k·x <= ineq_rhs_k
//!                 ||λ_k||² <= ω,              k ∈ {normal, faulty}
//! ```
//!
//! σ(θ) ≥ 1 means no admissible noise explains both models at once, so the
//! signal θ makes the two hypotheses distinguishable. The minimization over x
//! is shared by both models; the norm bound is rewritten into a second-order
//! cone via the hyperbolic map with the constant side fixed at 1.

use nalgebra::{DVector, SVD};
use thiserror::Error;

use crate::conic::{self, Expr, ProgramBuilder, SolveStatus};
use crate::model::{DesignProblem, StaticModel};

/// Relative tolerance of the orthogonal-projection range test in [`min_noise`].
const RANGE_TOL: f64 = 1e-8;
/// Residual tolerance for the optimality post-checks on a sigma witness.
const WITNESS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaStatus {
    Optimal,
    /// No measurement satisfies both inequality systems and range conditions.
    Infeasible,
    /// Never produced by a well-posed problem (ω is bounded below by 0).
    Unbounded,
}

/// Optimum of the separability program plus a feasible witness.
#[derive(Debug, Clone)]
pub struct SigmaResult {
    /// σ(θ); `f64::INFINITY` when the program is infeasible.
    pub sigma: f64,
    pub x_star: DVector<f64>,
    pub lambda_normal: DVector<f64>,
    pub lambda_faulty: DVector<f64>,
    pub status: SigmaStatus,
}

#[derive(Debug, Error)]
pub enum SigmaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cone solver failed: {0}")]
    Solver(String),
    #[error("witness violates the optimality contract: {0}")]
    Contract(String),
}

/// Evaluates σ(θ) with the default solver tolerance.
pub fn evaluate_sigma(problem: &DesignProblem, theta: &DVector<f64>) -> Result<SigmaResult, SigmaError> {
    evaluate_sigma_with_tolerance(problem, theta, conic::DEFAULT_TOLERANCE)
}

pub fn evaluate_sigma_with_tolerance(
    problem: &DesignProblem,
    theta: &DVector<f64>,
    tolerance: f64,
) -> Result<SigmaResult, SigmaError> {
    if theta.len() != problem.signal_dim() {
        return Err(SigmaError::Dimension(format!(
            "signal has {} entries, models expect {}",
            theta.len(),
            problem.signal_dim()
        )));
    }
    let n_x = problem.meas_dim();
    let n_l0 = problem.normal.noise_dim();
    let n_l1 = problem.faulty.noise_dim();

    // Variable layout: [x, omega, lambda_normal, lambda_faulty].
    let omega = n_x;
    let l0 = n_x + 1;
    let l1 = l0 + n_l0;
    let mut b = ProgramBuilder::new(l1 + n_l1);
    b.objective_coeff(omega, 1.0);

    for (model, l_start) in [(&problem.normal, l0), (&problem.faulty, l1)] {
        let shift = model.theta_map.column_iter().zip(theta.iter()).fold(
            DVector::zeros(model.eq_dim()),
            |acc, (col, &t)| acc + col * t,
        );
        for r in 0..model.eq_dim() {
            let mut e = Expr::constant(shift[r]);
            for c in 0..n_x {
                e = e.term(c, model.meas_map[(r, c)]);
            }
            for c in 0..model.noise_dim() {
                e = e.term(l_start + c, -model.noise_map[(r, c)]);
            }
            b.add_eq(e);
        }
        for r in 0..model.n_ineq() {
            let mut e = Expr::constant(model.ineq_rhs[r]);
            for c in 0..n_x {
                e = e.term(c, -model.ineq_lhs[(r, c)]);
            }
            b.add_nonneg(e);
        }
        // ||lambda||² <= omega via the hyperbolic map with the constant side
        // at 1: 4·1·ω >= ||2λ||² is exactly ω >= ||λ||².
        let v = (0..model.noise_dim())
            .map(|c| Expr::var(l_start + c).scale(2.0))
            .collect();
        b.add_hyperbolic(Expr::constant(1.0), Expr::var(omega), v);
    }

    let sol = conic::solve(&b.build(), tolerance).map_err(|e| SigmaError::Solver(e.to_string()))?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => {
            return Ok(SigmaResult {
                sigma: f64::INFINITY,
                x_star: DVector::zeros(0),
                lambda_normal: DVector::zeros(0),
                lambda_faulty: DVector::zeros(0),
                status: SigmaStatus::Infeasible,
            })
        }
        SolveStatus::DualInfeasible => {
            return Ok(SigmaResult {
                sigma: f64::NEG_INFINITY,
                x_star: DVector::zeros(0),
                lambda_normal: DVector::zeros(0),
                lambda_faulty: DVector::zeros(0),
                status: SigmaStatus::Unbounded,
            })
        }
        SolveStatus::NumericalFailure => {
            return Err(SigmaError::Solver(sol.violations.join("; ")))
        }
    }

    let result = SigmaResult {
        sigma: sol.primal[omega].max(0.0),
        x_star: sol.primal.rows(0, n_x).into_owned(),
        lambda_normal: sol.primal.rows(l0, n_l0).into_owned(),
        lambda_faulty: sol.primal.rows(l1, n_l1).into_owned(),
        status: SigmaStatus::Optimal,
    };
    check_witness(problem, theta, &result)?;
    Ok(result)
}

/// Re-substitutes the witness into both models and checks the binding property
/// (the norm bound is tight for at least one model at the optimum).
fn check_witness(
    problem: &DesignProblem,
    theta: &DVector<f64>,
    result: &SigmaResult,
) -> Result<(), SigmaError> {
    for (model, lambda) in [
        (&problem.normal, &result.lambda_normal),
        (&problem.faulty, &result.lambda_faulty),
    ] {
        let residual = &model.theta_map * theta + &model.meas_map * &result.x_star
            - &model.noise_map * lambda;
        let scale = 1.0
            + model
                .ineq_rhs
                .iter()
                .fold(0.0_f64, |a, v| a.max(v.abs()));
        let worst = residual.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if worst > WITNESS_TOL * scale {
            return Err(SigmaError::Contract(format!(
                "model equality residual {worst:.3e} exceeds {:.3e}",
                WITNESS_TOL * scale
            )));
        }
    }
    let norms = [
        result.lambda_normal.norm_squared(),
        result.lambda_faulty.norm_squared(),
    ];
    let largest = norms[0].max(norms[1]);
    if largest > result.sigma + WITNESS_TOL || largest < result.sigma - WITNESS_TOL {
        return Err(SigmaError::Contract(format!(
            "norm bound not binding: max ||lambda||² = {largest:.9e}, sigma = {:.9e}",
            result.sigma
        )));
    }
    Ok(())
}

/// Smallest noise norm under which `model` explains the *observed* measurement,
/// or `None` when the observation is inconsistent with the model (inequality
/// violated or residual outside the range of the noise map).
pub fn min_noise(
    model: &StaticModel,
    theta: &DVector<f64>,
    x_obs: &DVector<f64>,
) -> Result<Option<f64>, SigmaError> {
    if theta.len() != model.signal_dim() || x_obs.len() != model.meas_dim() {
        return Err(SigmaError::Dimension(format!(
            "signal/measurement lengths {}/{} do not match model dims {}/{}",
            theta.len(),
            x_obs.len(),
            model.signal_dim(),
            model.meas_dim()
        )));
    }
    let ineq_scale = 1.0
        + model
            .ineq_rhs
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
    let slack = &model.ineq_lhs * x_obs - &model.ineq_rhs;
    if slack.iter().any(|&v| v > 1e-9 * ineq_scale) {
        return Ok(None);
    }

    let residual = &model.theta_map * theta + &model.meas_map * x_obs;
    let res_scale = 1.0 + residual.norm();
    if model.noise_dim() == 0 {
        return Ok(if residual.norm() <= RANGE_TOL * res_scale {
            Some(0.0)
        } else {
            None
        });
    }

    // Minimum-norm solution of noise_map·λ = residual via SVD; the projection
    // residual doubles as the range test.
    let svd = SVD::new(model.noise_map.clone(), true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    let lambda = svd
        .solve(&residual, cutoff)
        .map_err(|e| SigmaError::Solver(e.to_string()))?;
    let off_range = (&model.noise_map * &lambda - &residual).norm();
    if off_range > RANGE_TOL * res_scale {
        return Ok(None);
    }
    Ok(Some(lambda.norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Normal,
    Faulty,
    Ambiguous,
    InconsistentWithBoth,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Normal => write!(f, "normal"),
            Verdict::Faulty => write!(f, "faulty"),
            Verdict::Ambiguous => write!(f, "ambiguous"),
            Verdict::InconsistentWithBoth => write!(f, "inconsistent-with-both"),
        }
    }
}

/// Outcome of the decision logic for one observed measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// Minimal noise norm for the normal model; `None` when infeasible.
    pub min_noise_normal: Option<f64>,
    /// Minimal noise norm for the faulty model; `None` when infeasible.
    pub min_noise_faulty: Option<f64>,
}

/// Decides which model is consistent with the observation at the problem's
/// noise bound. A model "fits" when its minimal noise norm is at most the
/// bound; infeasible counts as an infinite norm.
pub fn classify(
    problem: &DesignProblem,
    theta: &DVector<f64>,
    x_obs: &DVector<f64>,
) -> Result<Classification, SigmaError> {
    let rho_normal = min_noise(&problem.normal, theta, x_obs)?;
    let rho_faulty = min_noise(&problem.faulty, theta, x_obs)?;
    let fits = |rho: &Option<f64>| rho.map(|r| r <= problem.noise_bound).unwrap_or(false);
    let verdict = match (fits(&rho_normal), fits(&rho_faulty)) {
        (true, false) => Verdict::Normal,
        (false, true) => Verdict::Faulty,
        (true, true) => Verdict::Ambiguous,
        (false, false) => Verdict::InconsistentWithBoth,
    };
    Ok(Classification {
        verdict,
        min_noise_normal: rho_normal,
        min_noise_faulty: rho_faulty,
    })
}
