//! Distance-protection instance: negative-sequence current injection.
//!
//! A relay measures positive- and negative-sequence voltage and current
//! phasors. Under normal conditions the negative-sequence voltage tracks the
//! injected negative-sequence current through the apparent impedance z̄₋ and
//! the positive-sequence pair through z̄₊; under a phase-to-phase fault both
//! sequences see the fault-path impedance z̄_f instead. The injected
//! negative-sequence current is the auxiliary signal (a single phasor), and
//! additive noise on each complex equation absorbs measurement error.
//!
//! Converting the complex relations to real form stacks the measurements as
//! `x = (f₋, g₋, f₊, g₊, c₊, d₊)` (voltage then current components), the
//! signal as `θ = (μ, ν)`, and four noise components per model, giving the
//! two-model static system built by [`build_models`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ccp::{self, CcpConfig, DesignError, DesignStatus};
use crate::dual;
use crate::model::{DesignProblem, StaticModel};

/// A complex number in rectangular form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
}

impl Phasor {
    pub fn new(re: f64, im: f64) -> Self {
        Phasor { re, im }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn mul(&self, other: Phasor) -> Phasor {
        Phasor {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn sub(&self, other: Phasor) -> Phasor {
        Phasor {
            re: self.re - other.re,
            im: self.im - other.im,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl std::fmt::Display for Phasor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im < 0.0 {
            write!(f, "{} - j{}", self.re, -self.im)
        } else {
            write!(f, "{} + j{}", self.re, self.im)
        }
    }
}

/// Impedance data parameterizing the protection instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasorModelSpec {
    /// Apparent negative-sequence impedance under normal conditions.
    pub z_minus: Phasor,
    /// Apparent positive-sequence impedance under normal conditions.
    pub z_plus: Phasor,
    /// Impedance of the fault path.
    pub z_fault: Phasor,
}

impl PhasorModelSpec {
    pub fn new(z_minus: Phasor, z_plus: Phasor, z_fault: Phasor) -> Self {
        PhasorModelSpec {
            z_minus,
            z_plus,
            z_fault,
        }
    }

    /// Physically suspect but permitted inputs, e.g. negative resistances.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, z) in [
            ("z_minus", self.z_minus),
            ("z_plus", self.z_plus),
            ("z_fault", self.z_fault),
        ] {
            if z.re < 0.0 {
                out.push(format!("{name} has negative resistance ({})", z.re));
            }
        }
        out
    }
}

/// The 2×2 real matrix of multiplication by `z`: for any phasor `w`,
/// `complex_to_matrix(z) · (Re w, Im w)' = (Re zw, Im zw)`.
pub fn complex_to_matrix(z: Phasor) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[z.re, -z.im, z.im, z.re])
}

/// Assembles the two-model design problem for the protection instance:
/// identity cost, unit noise bound, no inequality constraints.
pub fn build_models(spec: &PhasorModelSpec) -> DesignProblem {
    let m_minus = complex_to_matrix(spec.z_minus);
    let m_plus = complex_to_matrix(spec.z_plus);
    let m_fault = complex_to_matrix(spec.z_fault);

    let theta_block = |m: &DMatrix<f64>| {
        let mut t = DMatrix::zeros(4, 2);
        t.view_mut((0, 0), (2, 2)).copy_from(&(-m));
        t
    };
    let meas_block = |m: &DMatrix<f64>| {
        let mut x = DMatrix::zeros(4, 6);
        x.view_mut((0, 0), (2, 2)).copy_from(&DMatrix::identity(2, 2));
        x.view_mut((2, 2), (2, 2)).copy_from(&DMatrix::identity(2, 2));
        x.view_mut((2, 4), (2, 2)).copy_from(&(-m));
        x
    };

    let normal = StaticModel::unconstrained(
        theta_block(&m_minus),
        meas_block(&m_plus),
        DMatrix::identity(4, 4),
    );
    let faulty = StaticModel::unconstrained(
        theta_block(&m_fault),
        meas_block(&m_fault),
        DMatrix::identity(4, 4),
    );
    DesignProblem::new(normal, faulty, DMatrix::identity(2, 2))
}

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("grid needs at least 2 nodes per axis, got {n_re}x{n_im}")]
    GridTooSmall { n_re: usize, n_im: usize },
    #[error("sweep range is empty: {min} >= {max}")]
    EmptyRange { min: f64, max: f64 },
}

/// Separability outcome of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellOutcome {
    Separable,
    NotSeparable,
    /// The solver failed on this cell; recorded, not dropped.
    SolverIssue,
}

/// Row-major separability grid over the signal plane: the cell for
/// `(re_axis[i], im_axis[j])` sits at index `i * im_axis.len() + j`.
#[derive(Debug, Clone)]
pub struct FeasibilityGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    pub cells: Vec<CellOutcome>,
}

impl FeasibilityGrid {
    pub fn cell(&self, i_re: usize, i_im: usize) -> CellOutcome {
        self.cells[i_re * self.im_axis.len() + i_im]
    }

    pub fn count_separable(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| **c == CellOutcome::Separable)
            .count()
    }
}

pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![min];
    }
    let step = (max - min) / (n - 1) as f64;
    (0..n).map(|i| min + step * i as f64).collect()
}

/// Classifies every node of the (re, im) grid by fixed-signal separability.
pub fn feasibility_grid(
    spec: &PhasorModelSpec,
    re_range: (f64, f64),
    im_range: (f64, f64),
    n_re: usize,
    n_im: usize,
    tolerance: f64,
) -> Result<FeasibilityGrid, DistanceError> {
    if n_re < 2 || n_im < 2 {
        return Err(DistanceError::GridTooSmall { n_re, n_im });
    }
    let problem = build_models(spec);
    let re_axis = linspace(re_range.0, re_range.1, n_re);
    let im_axis = linspace(im_range.0, im_range.1, n_im);
    let mut cells = Vec::with_capacity(n_re * n_im);
    for &re in &re_axis {
        for &im in &im_axis {
            let theta = DVector::from_column_slice(&[re, im]);
            let outcome =
                match dual::check_separability_with_tolerance(&problem, &theta, tolerance) {
                    Ok(true) => CellOutcome::Separable,
                    Ok(false) => CellOutcome::NotSeparable,
                    Err(_) => CellOutcome::SolverIssue,
                };
            cells.push(outcome);
        }
    }
    Ok(FeasibilityGrid {
        re_axis,
        im_axis,
        cells,
    })
}

/// One designed signal along the fault-reactance sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub x_fault: f64,
    pub theta_re: f64,
    pub theta_im: f64,
    pub theta_abs: f64,
    pub cost: f64,
    pub sigma: f64,
    pub status: DesignStatus,
}

/// Designs a signal for each fault reactance in `[xf_min, xf_max]`, keeping
/// the fault resistance of `spec_base`. A failed row is recorded through its
/// status and does not abort the sweep.
pub fn sweep_xf(
    spec_base: &PhasorModelSpec,
    xf_min: f64,
    xf_max: f64,
    n_points: usize,
    config: &CcpConfig,
) -> Result<Vec<SweepRow>, DesignError> {
    config.validate()?;
    if n_points > 1 && !(xf_min < xf_max) {
        return Err(DesignError::InvalidConfig(format!(
            "sweep range [{xf_min}, {xf_max}] is empty"
        )));
    }
    let mut rows = Vec::with_capacity(n_points);
    for x_fault in linspace(xf_min, xf_max, n_points) {
        let spec = PhasorModelSpec {
            z_fault: Phasor::new(spec_base.z_fault.re, x_fault),
            ..*spec_base
        };
        let problem = build_models(&spec);
        let row = match ccp::design(&problem, config) {
            Ok(r) => SweepRow {
                x_fault,
                theta_re: r.theta_star[0],
                theta_im: r.theta_star[1],
                theta_abs: r.theta_star.norm(),
                cost: r.cost,
                sigma: r.sigma_verified,
                status: r.status,
            },
            Err(_) => SweepRow {
                x_fault,
                theta_re: f64::NAN,
                theta_im: f64::NAN,
                theta_abs: f64::NAN,
                cost: f64::NAN,
                sigma: f64::NAN,
                status: DesignStatus::SolverFailure,
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigma::{self, SigmaStatus};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    pub(crate) fn paper_style_spec(x_fault: f64) -> PhasorModelSpec {
        PhasorModelSpec::new(
            Phasor::new(30.0, 35.0),
            Phasor::new(30.0, 35.0),
            Phasor::new(26.0, x_fault),
        )
    }

    /// Closed form for this instance: the positive-sequence residuals vanish
    /// at i₊ = e₊ = 0, and the best shared e₋ is the midpoint of the two
    /// predictions, so σ(θ) = |z̄₋ − z̄_f|²·|θ|²/4.
    fn sigma_oracle(spec: &PhasorModelSpec, theta_abs: f64) -> f64 {
        let gap = spec.z_minus.sub(spec.z_fault).abs();
        gap * gap * theta_abs * theta_abs / 4.0
    }

    #[test]
    fn multiplication_matrix_basics() {
        assert_eq!(
            complex_to_matrix(Phasor::new(1.0, 0.0)),
            DMatrix::identity(2, 2)
        );
        let rot = complex_to_matrix(Phasor::new(0.0, 1.0));
        assert_eq!(rot, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let m = complex_to_matrix(Phasor::new(30.0, 35.0));
        let w = m * dvector![1.0, 0.0];
        assert_eq!(w, dvector![30.0, 35.0]);
    }

    #[test]
    fn built_problem_is_consistent() {
        let p = build_models(&paper_style_spec(25.0));
        assert!(p.validate().is_empty());
        assert_eq!(p.signal_dim(), 2);
        assert_eq!(p.meas_dim(), 6);
        assert_eq!(p.normal.eq_dim(), 4);
        assert_eq!(p.normal.noise_dim(), 4);
        assert_eq!(p.normal.n_ineq(), 0);
        // signal enters only the negative-sequence rows, with a sign flip
        let m_minus = complex_to_matrix(Phasor::new(30.0, 35.0));
        assert_eq!(p.normal.theta_map.view((0, 0), (2, 2)), (-&m_minus).view((0, 0), (2, 2)));
        assert_eq!(p.normal.theta_map.view((2, 0), (2, 2)), DMatrix::zeros(2, 2).view((0, 0), (2, 2)));
    }

    #[test]
    fn sigma_matches_closed_form() {
        let spec = paper_style_spec(25.0);
        let p = build_models(&spec);
        for theta in [dvector![0.3, 0.0], dvector![0.1, -0.2], dvector![0.0, 0.5]] {
            let r = sigma::evaluate_sigma(&p, &theta).unwrap();
            assert_eq!(r.status, SigmaStatus::Optimal);
            assert_abs_diff_eq!(r.sigma, sigma_oracle(&spec, theta.norm()), epsilon = 1e-6);
        }
    }

    #[test]
    fn witness_reconstructs_complex_relations() {
        let spec = paper_style_spec(25.0);
        let p = build_models(&spec);
        let theta = dvector![0.4, -0.1];
        let r = sigma::evaluate_sigma(&p, &theta).unwrap();
        // normal model, negative sequence: e₋ − z̄₋·θ̄ = λ̄₋
        let e_minus = Phasor::new(r.x_star[0], r.x_star[1]);
        let t = Phasor::new(theta[0], theta[1]);
        let lam = e_minus.sub(spec.z_minus.mul(t));
        assert_abs_diff_eq!(lam.re, r.lambda_normal[0], epsilon = 1e-6);
        assert_abs_diff_eq!(lam.im, r.lambda_normal[1], epsilon = 1e-6);
        // normal model, positive sequence: e₊ − z̄₊·ī₊ = λ̄₊
        let e_plus = Phasor::new(r.x_star[2], r.x_star[3]);
        let i_plus = Phasor::new(r.x_star[4], r.x_star[5]);
        let lam = e_plus.sub(spec.z_plus.mul(i_plus));
        assert_abs_diff_eq!(lam.re, r.lambda_normal[2], epsilon = 1e-6);
        assert_abs_diff_eq!(lam.im, r.lambda_normal[3], epsilon = 1e-6);
    }

    #[test]
    fn designed_signal_matches_closed_form_radius() {
        let spec = paper_style_spec(25.0);
        let p = build_models(&spec);
        let config = CcpConfig {
            n_starts: 3,
            ..CcpConfig::default()
        };
        let r = ccp::design(&p, &config).unwrap();
        assert_eq!(r.status, DesignStatus::Separable);
        // optimal radius 2/|z̄₋ − z̄_f| = 2/√116
        let radius = 2.0 / 116.0_f64.sqrt();
        assert_abs_diff_eq!(r.theta_star.norm(), radius, epsilon = 2e-3);
        assert_abs_diff_eq!(r.cost, radius * radius, epsilon = 1e-3);
        assert!(r.sigma_verified >= 1.0 - 1e-6 && r.sigma_verified <= 1.1);
    }

    #[test]
    fn coincident_impedances_are_inseparable() {
        let z = Phasor::new(26.0, 25.0);
        let spec = PhasorModelSpec::new(z, z, z);
        let p = build_models(&spec);
        let config = CcpConfig {
            n_starts: 2,
            ..CcpConfig::default()
        };
        let r = ccp::design(&p, &config).unwrap();
        assert_eq!(r.status, DesignStatus::Inseparable);
    }

    #[test]
    fn zero_impedances_are_inseparable() {
        let z = Phasor::new(0.0, 0.0);
        let spec = PhasorModelSpec::new(z, z, z);
        let p = build_models(&spec);
        assert!(p.validate().is_empty());
        let config = CcpConfig {
            n_starts: 2,
            ..CcpConfig::default()
        };
        let r = ccp::design(&p, &config).unwrap();
        assert_eq!(r.status, DesignStatus::Inseparable);
    }

    #[test]
    fn grid_counts_follow_the_infeasible_disks() {
        // separability radius 2/|z̄₋ − z̄_f|: 0.186 at x_f = 25, 0.5 at x_f = 35;
        // on the 5×5 grid over [-0.9, 0.9]² that leaves 24 vs 20 separable nodes
        let g25 = feasibility_grid(
            &paper_style_spec(25.0),
            (-0.9, 0.9),
            (-0.9, 0.9),
            5,
            5,
            1e-8,
        )
        .unwrap();
        let g35 = feasibility_grid(
            &paper_style_spec(35.0),
            (-0.9, 0.9),
            (-0.9, 0.9),
            5,
            5,
            1e-8,
        )
        .unwrap();
        assert_eq!(g25.count_separable(), 24);
        assert_eq!(g35.count_separable(), 20);
        assert!(g35.count_separable() < g25.count_separable());
        // the origin never separates and the grid is symmetric under θ → -θ
        assert_eq!(g25.cell(2, 2), CellOutcome::NotSeparable);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g35.cell(i, j), g35.cell(4 - i, 4 - j));
            }
        }
    }

    #[test]
    fn grid_rejects_degenerate_axes() {
        let err = feasibility_grid(&paper_style_spec(25.0), (0.0, 1.0), (0.0, 1.0), 1, 5, 1e-8);
        assert!(err.is_err());
    }

    #[test]
    fn sweep_peaks_near_the_hard_reactance() {
        let config = CcpConfig {
            n_starts: 2,
            ..CcpConfig::default()
        };
        let rows = sweep_xf(&paper_style_spec(25.0), 12.0, 58.0, 5, &config).unwrap();
        assert_eq!(rows.len(), 5);
        // points: 12, 23.5, 35, 46.5, 58 — |θ| peaks at x_f = 35 (radius 0.5)
        let mid = &rows[2];
        assert_eq!(mid.status, DesignStatus::Separable);
        assert_abs_diff_eq!(mid.theta_abs, 0.5, epsilon = 5e-3);
        assert!(rows[0].theta_abs < mid.theta_abs);
        assert!(rows[4].theta_abs < mid.theta_abs);
    }

    #[test]
    fn sweep_single_point_degenerates_to_one_design() {
        let config = CcpConfig {
            n_starts: 2,
            ..CcpConfig::default()
        };
        let rows = sweep_xf(&paper_style_spec(25.0), 25.0, 58.0, 1, &config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].x_fault, 25.0);
        assert_eq!(rows[0].status, DesignStatus::Separable);
    }

    #[test]
    fn negative_resistance_is_flagged() {
        let spec = PhasorModelSpec::new(
            Phasor::new(-1.0, 2.0),
            Phasor::new(1.0, 2.0),
            Phasor::new(1.0, 2.0),
        );
        let w = spec.warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("z_minus"));
    }
}
