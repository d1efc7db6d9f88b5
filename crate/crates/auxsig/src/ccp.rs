//! Penalty convex-concave iteration for the auxiliary-signal design.
//!
//! Each iteration solves the convex subproblem of [`crate::dual::build_ccp_subproblem`]
//! at the current anchor, then raises the slack penalty `γ` by the factor `ζ`
//! up to `γ_max`. A run stops when both the penalized objective has settled
//! and the slack is below tolerance, or when it stalls at `γ_max` with the
//! slack stuck, or at the iteration cap. Several starts are attempted; every
//! converged signal is re-verified primally through [`crate::sigma::evaluate_sigma`]
//! before it may be reported separable, and the cheapest verified design wins.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conic::{self, SolveStatus};
use crate::dual;
use crate::model::{DesignProblem, Violation};
use crate::sigma::{self, SigmaStatus};

/// Iterations of slack non-progress at `γ_max` after which a run is declared
/// stalled.
const STALL_WINDOW: usize = 10;
/// A verified design must reach σ(θ*) at least this large.
const SEPARABLE_GATE: f64 = 1.0 - 1e-6;
/// KKT tolerance floor for the subproblem solves. Late iterations carry large
/// penalties and near-tangent constraint sets, where certification-grade
/// residuals are unattainable and unnecessary: the subproblems only steer the
/// anchors, and the returned design is re-verified primally at the caller's
/// tolerance.
const SUBPROBLEM_TOL_FLOOR: f64 = 1e-6;

/// Algorithm parameters. The defaults follow common penalty practice:
/// start with a unit penalty, grow it by 1.5 per iteration, cap it at 1e4.
#[derive(Debug, Clone)]
pub struct CcpConfig {
    pub gamma0: f64,
    pub gamma_max: f64,
    pub zeta: f64,
    pub max_iters: usize,
    pub tol_objective: f64,
    pub tol_slack: f64,
    pub n_starts: usize,
    pub rng_seed: u64,
    pub init_radius: f64,
    /// KKT tolerance handed to the cone backend.
    pub solver_tolerance: f64,
}

impl Default for CcpConfig {
    fn default() -> Self {
        CcpConfig {
            gamma0: 1.0,
            gamma_max: 1e4,
            zeta: 1.5,
            max_iters: 200,
            tol_objective: 1e-6,
            tol_slack: 1e-6,
            n_starts: 5,
            rng_seed: 0,
            init_radius: 1.0,
            solver_tolerance: conic::DEFAULT_TOLERANCE,
        }
    }
}

impl CcpConfig {
    /// Checks the parameter invariants (positive penalties, growing schedule).
    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |msg: String| Err(DesignError::InvalidConfig(msg));
        if !(self.gamma0 > 0.0) {
            return bad(format!("gamma0 must be positive, got {}", self.gamma0));
        }
        if !(self.gamma_max > self.gamma0) {
            return bad(format!(
                "gamma_max ({}) must exceed gamma0 ({})",
                self.gamma_max, self.gamma0
            ));
        }
        if !(self.zeta > 1.0) {
            return bad(format!("zeta must exceed 1, got {}", self.zeta));
        }
        if self.max_iters == 0 || self.n_starts == 0 {
            return bad("max_iters and n_starts must be positive".into());
        }
        if !(self.tol_objective > 0.0) || !(self.tol_slack > 0.0) || !(self.init_radius > 0.0) {
            return bad("tolerances and init_radius must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignStatus {
    Separable,
    Inseparable,
    IterLimit,
    SolverFailure,
}

impl std::fmt::Display for DesignStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DesignStatus::Separable => write!(f, "separable"),
            DesignStatus::Inseparable => write!(f, "inseparable"),
            DesignStatus::IterLimit => write!(f, "iter-limit"),
            DesignStatus::SolverFailure => write!(f, "solver-failure"),
        }
    }
}

/// One row of the per-iteration convergence record.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Penalized objective θ'(cost)θ + γ·ξ at this iterate.
    pub objective: f64,
    pub slack: f64,
    pub gamma: f64,
    pub theta: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub theta_star: DVector<f64>,
    /// θ*'(cost)θ*.
    pub cost: f64,
    /// σ(θ*) re-evaluated primally; NaN if no candidate could be evaluated.
    pub sigma_verified: f64,
    pub status: DesignStatus,
    /// Trace of the run that produced `theta_star`.
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidProblem(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Deterministic per-start initialization.
///
/// Start 0 aims the signal along the leading right singular vector of the
/// difference of the two signal maps (the direction the models disagree on
/// most), with zero dual anchors. Later starts draw the signal uniformly from
/// the sphere of radius `init_radius` and the dual anchors from a small
/// Gaussian, all seeded by `(rng_seed, start_index)`.
pub fn initialize(
    problem: &DesignProblem,
    config: &CcpConfig,
    start_index: usize,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n_t = problem.signal_dim();
    let e0 = problem.normal.eq_dim();
    let e1 = problem.faulty.eq_dim();
    if start_index == 0 {
        let diff = &problem.faulty.theta_map - &problem.normal.theta_map;
        let svd = diff.svd(false, true);
        let mut theta = DVector::zeros(n_t);
        let lead = svd
            .singular_values
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        if lead > 1e-12 {
            if let Some(v_t) = svd.v_t {
                theta.copy_from(&v_t.row(0).transpose());
            }
        } else if n_t > 0 {
            theta[0] = 1.0;
        }
        theta *= config.init_radius;
        return (theta, DVector::zeros(e0), DVector::zeros(e1));
    }
    let seed = config
        .rng_seed
        .wrapping_add((start_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = |n: usize| {
        // Box-Muller from uniform draws
        DVector::from_fn(n, |_, _| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
    };
    let mut theta = gaussian(n_t);
    let norm = theta.norm();
    if norm > 1e-12 {
        theta *= config.init_radius / norm;
    } else if n_t > 0 {
        theta[0] = config.init_radius;
    }
    let beta0 = gaussian(e0) * 0.1;
    let beta1 = gaussian(e1) * 0.1;
    (theta, beta0, beta1)
}

enum RunEnd {
    Converged,
    Stalled,
    IterLimit,
    SolverFailed,
}

struct RunOutcome {
    end: RunEnd,
    theta: DVector<f64>,
    trace: Vec<TraceEntry>,
}

fn quadratic_cost(cost: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    theta.dot(&(cost * theta))
}

fn run_single(problem: &DesignProblem, config: &CcpConfig, start_index: usize) -> RunOutcome {
    let (mut theta, mut beta0, mut beta1) = initialize(problem, config, start_index);
    let subproblem_tol = config.solver_tolerance.max(SUBPROBLEM_TOL_FLOOR);
    let mut gamma = config.gamma0;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut prev_objective = f64::INFINITY;
    let mut slack_history: Vec<f64> = Vec::new();

    for z in 0..config.max_iters {
        let sub = match dual::build_ccp_subproblem(problem, &theta, &beta0, &beta1, gamma) {
            Ok(s) => s,
            Err(_) => {
                return RunOutcome {
                    end: RunEnd::SolverFailed,
                    theta,
                    trace,
                }
            }
        };
        let sol = match conic::solve(&sub.program, subproblem_tol) {
            Ok(s) if s.status == SolveStatus::Optimal => s,
            _ => {
                // A mid-run numerical failure still ends the run with usable
                // evidence: a slack stuck above tolerance reads as a stall
                // (degenerate instances break the backend before the γ_max
                // stall rule can fire), a settled slack as convergence — the
                // primal σ check gates any separability claim downstream.
                let end = match trace.last() {
                    Some(e) if e.slack <= config.tol_slack => RunEnd::Converged,
                    Some(_) => RunEnd::Stalled,
                    None => RunEnd::SolverFailed,
                };
                return RunOutcome { end, theta, trace };
            }
        };
        let it = sub.extract(problem, &sol);
        let objective = quadratic_cost(&problem.cost, &it.theta) + gamma * it.xi;
        theta = it.theta;
        beta0 = it.beta_normal;
        beta1 = it.beta_faulty;
        trace.push(TraceEntry {
            iteration: z,
            objective,
            slack: it.xi,
            gamma,
            theta: theta.clone(),
        });

        let settled = (prev_objective - objective).abs() <= config.tol_objective * (1.0 + objective.abs());
        if settled && it.xi <= config.tol_slack {
            return RunOutcome {
                end: RunEnd::Converged,
                theta,
                trace,
            };
        }
        prev_objective = objective;

        if gamma >= config.gamma_max {
            slack_history.push(it.xi);
            if it.xi > config.tol_slack && slack_history.len() > STALL_WINDOW {
                let earlier = slack_history[slack_history.len() - 1 - STALL_WINDOW];
                if earlier - it.xi < config.tol_slack {
                    return RunOutcome {
                        end: RunEnd::Stalled,
                        theta,
                        trace,
                    };
                }
            }
        }
        gamma = (gamma * config.zeta).min(config.gamma_max);
    }
    RunOutcome {
        end: RunEnd::IterLimit,
        theta,
        trace,
    }
}

/// σ(θ) at the run's final signal, plus a rescaling polish for homogeneous
/// problems: with all inequality right-hand sides zero, σ(cθ) = c²σ(θ), so
/// dividing by √σ pins the binding constraint at σ ≈ 1 (and shrinks the cost
/// whenever the iteration overshot).
fn verify_and_polish(
    problem: &DesignProblem,
    config: &CcpConfig,
    theta: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let eval = |t: &DVector<f64>| {
        sigma::evaluate_sigma_with_tolerance(problem, t, config.solver_tolerance)
            .ok()
            .and_then(|r| match r.status {
                SigmaStatus::Optimal => Some(r.sigma),
                // no noise explains both models at this signal: separable outright
                SigmaStatus::Infeasible => Some(f64::INFINITY),
                SigmaStatus::Unbounded => None,
            })
    };
    let sigma0 = eval(theta)?;
    if problem.is_homogeneous() && sigma0.is_finite() && sigma0 > 1e-9 && (sigma0 - 1.0).abs() > 1e-9 {
        let polished = theta / sigma0.sqrt();
        if let Some(sigma1) = eval(&polished) {
            if sigma1 >= SEPARABLE_GATE {
                return Some((polished, sigma1));
            }
        }
    }
    Some((theta.clone(), sigma0))
}

/// Designs a minimal-cost auxiliary signal for `problem`.
///
/// Runs the penalty convex-concave iteration from `n_starts` initializations
/// and returns the cheapest signal whose separability was verified primally.
/// With no verified signal, the result carries the best attempt and a status
/// explaining the failure mode.
pub fn design(problem: &DesignProblem, config: &CcpConfig) -> Result<DesignResult, DesignError> {
    let violations = problem.validate();
    if !violations.is_empty() {
        return Err(DesignError::InvalidProblem(violations));
    }
    config.validate()?;

    let mut runs = Vec::with_capacity(config.n_starts);
    for s in 0..config.n_starts {
        runs.push(run_single(problem, config, s));
    }

    struct Candidate {
        run: usize,
        theta: DVector<f64>,
        sigma: f64,
        cost: f64,
    }
    let mut best: Option<Candidate> = None;
    let mut best_attempt: Option<Candidate> = None;
    let mut saw_converged_or_stalled = false;
    let mut saw_iter_limit = false;

    for (i, run) in runs.iter().enumerate() {
        match run.end {
            RunEnd::Converged | RunEnd::Stalled => saw_converged_or_stalled = true,
            RunEnd::IterLimit => saw_iter_limit = true,
            RunEnd::SolverFailed => continue,
        }
        let Some((theta, sigma)) = verify_and_polish(problem, config, &run.theta) else {
            continue;
        };
        let cost = quadratic_cost(&problem.cost, &theta);
        let cand = Candidate {
            run: i,
            theta,
            sigma,
            cost,
        };
        let verified = matches!(run.end, RunEnd::Converged) && cand.sigma >= SEPARABLE_GATE;
        if verified && best.as_ref().map(|b| cand.cost < b.cost).unwrap_or(true) {
            best = Some(cand);
        } else if best_attempt
            .as_ref()
            .map(|b| cand.sigma > b.sigma)
            .unwrap_or(true)
        {
            best_attempt = Some(cand);
        }
    }

    if let Some(b) = best {
        return Ok(DesignResult {
            theta_star: b.theta,
            cost: b.cost,
            sigma_verified: b.sigma,
            status: DesignStatus::Separable,
            trace: std::mem::take(&mut runs[b.run].trace),
        });
    }

    let status = if saw_converged_or_stalled {
        DesignStatus::Inseparable
    } else if saw_iter_limit {
        DesignStatus::IterLimit
    } else {
        DesignStatus::SolverFailure
    };
    if let Some(b) = best_attempt {
        return Ok(DesignResult {
            theta_star: b.theta,
            cost: b.cost,
            sigma_verified: b.sigma,
            status,
            trace: std::mem::take(&mut runs[b.run].trace),
        });
    }
    Ok(DesignResult {
        theta_star: DVector::zeros(problem.signal_dim()),
        cost: 0.0,
        sigma_verified: f64::NAN,
        status,
        trace: runs.pop().map(|r| r.trace).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StaticModel;
    use crate::sigma::tests::scalar_pair;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn fast_config() -> CcpConfig {
        CcpConfig {
            n_starts: 3,
            ..CcpConfig::default()
        }
    }

    #[test]
    fn scalar_pair_design_reaches_unit_signal() {
        let p = scalar_pair();
        let r = design(&p, &fast_config()).unwrap();
        assert_eq!(r.status, DesignStatus::Separable);
        assert_abs_diff_eq!(r.cost, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.theta_star[0].abs(), 1.0, epsilon = 1e-3);
        assert!(r.sigma_verified >= 1.0 - 1e-6 && r.sigma_verified <= 1.0 + 1e-3);
        assert!(dual::check_separability(&p, &r.theta_star).unwrap());
    }

    #[test]
    fn identical_models_are_inseparable() {
        let m = StaticModel::unconstrained(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]);
        let p = DesignProblem::new(m.clone(), m, dmatrix![1.0]);
        let r = design(&p, &fast_config()).unwrap();
        assert_eq!(r.status, DesignStatus::Inseparable);
    }

    #[test]
    fn gamma_schedule_is_monotone_and_capped() {
        let p = scalar_pair();
        let r = design(&p, &fast_config()).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1].gamma >= w[0].gamma);
        }
        for e in &r.trace {
            assert!(e.gamma <= fast_config().gamma_max);
        }
    }

    #[test]
    fn penalized_objective_descends_once_gamma_caps() {
        let p = scalar_pair();
        let config = CcpConfig {
            gamma0: 1.0,
            gamma_max: 4.0,
            zeta: 2.0,
            n_starts: 1,
            ..CcpConfig::default()
        };
        let r = design(&p, &config).unwrap();
        let capped: Vec<&TraceEntry> = r
            .trace
            .iter()
            .filter(|e| e.gamma >= config.gamma_max)
            .collect();
        for w in capped.windows(2) {
            let here = w[0].theta.norm_squared() + config.gamma_max * w[0].slack;
            let next = w[1].theta.norm_squared() + config.gamma_max * w[1].slack;
            assert!(next <= here + 1e-7, "objective rose from {here} to {next}");
        }
    }

    #[test]
    fn initialize_start_zero_is_deterministic() {
        let p = scalar_pair();
        let config = CcpConfig::default();
        let (theta, b0, b1) = initialize(&p, &config, 0);
        // leading right singular vector of the 1x1 difference map, scaled
        assert_abs_diff_eq!(theta[0].abs(), config.init_radius, epsilon = 1e-12);
        assert_eq!(b0.norm(), 0.0);
        assert_eq!(b1.norm(), 0.0);
    }

    #[test]
    fn initialize_is_seeded() {
        let p = scalar_pair();
        let config = CcpConfig::default();
        let a = initialize(&p, &config, 2);
        let b = initialize(&p, &config, 2);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = initialize(&p, &config, 3);
        assert_ne!(a.0, c.0);
        assert_abs_diff_eq!(c.0.norm(), config.init_radius, epsilon = 1e-12);
    }

    #[test]
    fn design_is_reproducible() {
        let p = scalar_pair();
        let r1 = design(&p, &fast_config()).unwrap();
        let r2 = design(&p, &fast_config()).unwrap();
        assert_eq!(r1.trace.len(), r2.trace.len());
        assert_eq!(r1.theta_star, r2.theta_star);
        assert_eq!(r1.cost, r2.cost);
        for (a, b) in r1.trace.iter().zip(r2.trace.iter()) {
            assert_eq!(a.objective, b.objective);
            assert_eq!(a.slack, b.slack);
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let p = scalar_pair();
        let config = CcpConfig {
            zeta: 0.5,
            ..CcpConfig::default()
        };
        assert!(matches!(
            design(&p, &config),
            Err(DesignError::InvalidConfig(_))
        ));
    }

    #[test]
    fn rejects_invalid_problem() {
        let mut p = scalar_pair();
        p.cost = dmatrix![0.0, 1.0; 0.0, 0.0];
        assert!(matches!(
            design(&p, &CcpConfig::default()),
            Err(DesignError::InvalidProblem(_))
        ));
    }

    #[test]
    fn cost_matches_quadratic_form() {
        let p = scalar_pair();
        let r = design(&p, &fast_config()).unwrap();
        let direct = r.theta_star.dot(&(&p.cost * &r.theta_star));
        assert_abs_diff_eq!(r.cost, direct, epsilon = 1e-9 * (1.0 + direct.abs()));
    }
}
