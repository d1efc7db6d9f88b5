//! The two-model static system description and its consistency checks.
//!
//! A behavioral mode is the linear relation `theta_map·θ + meas_map·x = noise_map·λ`
//! over an auxiliary signal `θ`, measured quantities `x`, and bounded noise `λ`,
//! together with the measurement constraints `ineq_lhs·x <= ineq_rhs`. A
//! [`DesignProblem`] pairs a normal and a faulty mode with the cost matrix used
//! to size the auxiliary signal. The Euclidean norm is used for the noise
//! throughout, and the bound is non-strict.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance for the cost-matrix symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance for the cost-matrix positive-semidefiniteness check.
pub const PSD_TOL: f64 = 1e-9;

/// One behavioral mode of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticModel {
    /// Maps the auxiliary signal into the balance equations (n_e × n_θ).
    pub theta_map: DMatrix<f64>,
    /// Maps the measured quantities into the balance equations (n_e × n_x).
    pub meas_map: DMatrix<f64>,
    /// Maps the noise into the balance equations (n_e × n_λ).
    pub noise_map: DMatrix<f64>,
    /// Measurement inequality constraints, left side (m × n_x); m may be 0.
    pub ineq_lhs: DMatrix<f64>,
    /// Measurement inequality constraints, right side (length m).
    pub ineq_rhs: DVector<f64>,
}

impl StaticModel {
    pub fn new(
        theta_map: DMatrix<f64>,
        meas_map: DMatrix<f64>,
        noise_map: DMatrix<f64>,
        ineq_lhs: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Self {
        StaticModel {
            theta_map,
            meas_map,
            noise_map,
            ineq_lhs,
            ineq_rhs,
        }
    }

    /// A mode with no measurement inequality constraints.
    pub fn unconstrained(
        theta_map: DMatrix<f64>,
        meas_map: DMatrix<f64>,
        noise_map: DMatrix<f64>,
    ) -> Self {
        let n_x = meas_map.ncols();
        StaticModel::new(
            theta_map,
            meas_map,
            noise_map,
            DMatrix::zeros(0, n_x),
            DVector::zeros(0),
        )
    }

    /// Number of balance equations (rows shared by the three maps).
    pub fn eq_dim(&self) -> usize {
        self.theta_map.nrows()
    }

    pub fn signal_dim(&self) -> usize {
        self.theta_map.ncols()
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_map.ncols()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_map.ncols()
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq_rhs.len()
    }

    fn finite(&self) -> bool {
        self.theta_map.iter().all(|v| v.is_finite())
            && self.meas_map.iter().all(|v| v.is_finite())
            && self.noise_map.iter().all(|v| v.is_finite())
            && self.ineq_lhs.iter().all(|v| v.is_finite())
            && self.ineq_rhs.iter().all(|v| v.is_finite())
    }
}

/// A normal/faulty model pair plus the design cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub normal: StaticModel,
    pub faulty: StaticModel,
    /// Symmetric positive-semidefinite cost matrix on the auxiliary signal (n_θ × n_θ).
    pub cost: DMatrix<f64>,
    /// Right-hand side of the noise-norm bound; 1 after [`DesignProblem::scale_noise`].
    pub noise_bound: f64,
}

impl DesignProblem {
    /// Pairs two modes with a cost matrix at the default noise bound of 1.
    pub fn new(normal: StaticModel, faulty: StaticModel, cost: DMatrix<f64>) -> Self {
        DesignProblem {
            normal,
            faulty,
            cost,
            noise_bound: 1.0,
        }
    }

    pub fn with_noise_bound(mut self, bound: f64) -> Self {
        self.noise_bound = bound;
        self
    }

    pub fn signal_dim(&self) -> usize {
        self.normal.signal_dim()
    }

    pub fn meas_dim(&self) -> usize {
        self.normal.meas_dim()
    }

    /// True when every inequality right-hand side is zero (or absent), which
    /// makes the separability measure 2-homogeneous in the signal.
    pub fn is_homogeneous(&self) -> bool {
        self.normal.ineq_rhs.iter().all(|&v| v == 0.0)
            && self.faulty.ineq_rhs.iter().all(|&v| v == 0.0)
    }

    /// Reports every invariant violation; an empty report means the problem is
    /// dimensionally and semantically consistent.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (role, model) in [
            (ModelRole::Normal, &self.normal),
            (ModelRole::Faulty, &self.faulty),
        ] {
            let rows = (
                model.theta_map.nrows(),
                model.meas_map.nrows(),
                model.noise_map.nrows(),
            );
            if rows.0 != rows.1 || rows.1 != rows.2 {
                out.push(Violation::EqualityRowMismatch {
                    model: role,
                    theta_rows: rows.0,
                    meas_rows: rows.1,
                    noise_rows: rows.2,
                });
            }
            if model.ineq_lhs.nrows() != model.ineq_rhs.len() {
                out.push(Violation::IneqRowMismatch {
                    model: role,
                    lhs_rows: model.ineq_lhs.nrows(),
                    rhs_len: model.ineq_rhs.len(),
                });
            }
            if model.ineq_lhs.nrows() > 0 && model.ineq_lhs.ncols() != model.meas_dim() {
                out.push(Violation::IneqColMismatch {
                    model: role,
                    lhs_cols: model.ineq_lhs.ncols(),
                    meas_cols: model.meas_dim(),
                });
            }
            if !model.finite() {
                out.push(Violation::NonFinite { model: Some(role) });
            }
        }
        if self.normal.signal_dim() != self.faulty.signal_dim() {
            out.push(Violation::SignalDimMismatch {
                normal: self.normal.signal_dim(),
                faulty: self.faulty.signal_dim(),
            });
        }
        if self.normal.meas_dim() != self.faulty.meas_dim() {
            out.push(Violation::MeasDimMismatch {
                normal: self.normal.meas_dim(),
                faulty: self.faulty.meas_dim(),
            });
        }
        if !self.cost.iter().all(|v| v.is_finite()) || !self.noise_bound.is_finite() {
            out.push(Violation::NonFinite { model: None });
        }
        if !self.cost.is_square() || self.cost.nrows() != self.normal.signal_dim() {
            out.push(Violation::CostDimMismatch {
                cost_rows: self.cost.nrows(),
                cost_cols: self.cost.ncols(),
                signal: self.normal.signal_dim(),
            });
        } else if self.cost.iter().all(|v| v.is_finite()) {
            let scale = self.cost.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let asym = (&self.cost - self.cost.transpose())
                .iter()
                .fold(0.0_f64, |a, v| a.max(v.abs()));
            if asym > SYMMETRY_TOL * scale.max(1.0) {
                out.push(Violation::CostAsymmetric { max_asymmetry: asym });
            } else if self.cost.nrows() > 0 {
                let sym = (&self.cost + self.cost.transpose()) * 0.5;
                let eigs = sym.symmetric_eigenvalues();
                let min = eigs.min();
                let spectral = eigs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                if min < -PSD_TOL * spectral {
                    out.push(Violation::CostNotPsd {
                        min_eigenvalue: min,
                    });
                }
            }
        }
        if !(self.noise_bound > 0.0) {
            out.push(Violation::NonpositiveNoiseBound {
                bound: self.noise_bound,
            });
        }
        out
    }

    /// Folds the noise bound into the noise maps, returning an equivalent
    /// problem with bound 1. The scaled separability measure relates to the
    /// original by `sigma_original = bound² · sigma_scaled`; the feasible
    /// (x, θ) sets of the two problems are identical.
    pub fn scale_noise(&self) -> Result<DesignProblem, NoiseBoundError> {
        if !(self.noise_bound > 0.0) || !self.noise_bound.is_finite() {
            return Err(NoiseBoundError {
                bound: self.noise_bound,
            });
        }
        if self.noise_bound == 1.0 {
            return Ok(self.clone());
        }
        let mut scaled = self.clone();
        scaled.normal.noise_map *= self.noise_bound;
        scaled.faulty.noise_map *= self.noise_bound;
        scaled.noise_bound = 1.0;
        Ok(scaled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelRole {
    Normal,
    Faulty,
}

impl std::fmt::Display for ModelRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelRole::Normal => write!(f, "normal"),
            ModelRole::Faulty => write!(f, "faulty"),
        }
    }
}

/// A single invariant violation; violations are data, not faults.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EqualityRowMismatch {
        model: ModelRole,
        theta_rows: usize,
        meas_rows: usize,
        noise_rows: usize,
    },
    IneqRowMismatch {
        model: ModelRole,
        lhs_rows: usize,
        rhs_len: usize,
    },
    IneqColMismatch {
        model: ModelRole,
        lhs_cols: usize,
        meas_cols: usize,
    },
    NonFinite {
        /// `None` means the problem-level data (cost or noise bound).
        model: Option<ModelRole>,
    },
    SignalDimMismatch {
        normal: usize,
        faulty: usize,
    },
    MeasDimMismatch {
        normal: usize,
        faulty: usize,
    },
    CostDimMismatch {
        cost_rows: usize,
        cost_cols: usize,
        signal: usize,
    },
    CostAsymmetric {
        max_asymmetry: f64,
    },
    CostNotPsd {
        min_eigenvalue: f64,
    },
    NonpositiveNoiseBound {
        bound: f64,
    },
}

impl Violation {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::EqualityRowMismatch { .. } => "equality-row-mismatch",
            Violation::IneqRowMismatch { .. } => "ineq-row-mismatch",
            Violation::IneqColMismatch { .. } => "ineq-col-mismatch",
            Violation::NonFinite { .. } => "non-finite",
            Violation::SignalDimMismatch { .. } => "signal-dim-mismatch",
            Violation::MeasDimMismatch { .. } => "meas-dim-mismatch",
            Violation::CostDimMismatch { .. } => "cost-dim-mismatch",
            Violation::CostAsymmetric { .. } => "cost-asymmetric",
            Violation::CostNotPsd { .. } => "cost-not-psd",
            Violation::NonpositiveNoiseBound { .. } => "nonpositive-noise-bound",
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EqualityRowMismatch {
                model,
                theta_rows,
                meas_rows,
                noise_rows,
            } => write!(
                f,
                "[{}] {model} model: theta/meas/noise maps have {theta_rows}/{meas_rows}/{noise_rows} rows",
                self.code()
            ),
            Violation::IneqRowMismatch {
                model,
                lhs_rows,
                rhs_len,
            } => write!(
                f,
                "[{}] {model} model: ineq_lhs has {lhs_rows} rows, ineq_rhs has {rhs_len}",
                self.code()
            ),
            Violation::IneqColMismatch {
                model,
                lhs_cols,
                meas_cols,
            } => write!(
                f,
                "[{}] {model} model: ineq_lhs has {lhs_cols} columns for {meas_cols} measured variables",
                self.code()
            ),
            Violation::NonFinite { model } => match model {
                Some(role) => write!(f, "[{}] {role} model contains non-finite entries", self.code()),
                None => write!(f, "[{}] cost or noise bound is non-finite", self.code()),
            },
            Violation::SignalDimMismatch { normal, faulty } => write!(
                f,
                "[{}] signal dimension differs between models: {normal} vs {faulty}",
                self.code()
            ),
            Violation::MeasDimMismatch { normal, faulty } => write!(
                f,
                "[{}] measurement dimension differs between models: {normal} vs {faulty}",
                self.code()
            ),
            Violation::CostDimMismatch {
                cost_rows,
                cost_cols,
                signal,
            } => write!(
                f,
                "[{}] cost matrix is {cost_rows}x{cost_cols} for signal dimension {signal}",
                self.code()
            ),
            Violation::CostAsymmetric { max_asymmetry } => write!(
                f,
                "[{}] cost matrix asymmetric by {max_asymmetry:.3e}",
                self.code()
            ),
            Violation::CostNotPsd { min_eigenvalue } => write!(
                f,
                "[{}] cost matrix has negative eigenvalue {min_eigenvalue:.3e}",
                self.code()
            ),
            Violation::NonpositiveNoiseBound { bound } => write!(
                f,
                "[{}] noise bound {bound} is not positive",
                self.code()
            ),
        }
    }
}

#[derive(Debug, Error)]
#[error("noise bound must be positive and finite, got {bound}")]
pub struct NoiseBoundError {
    pub bound: f64,
}
