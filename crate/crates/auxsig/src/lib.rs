//! Design of minimal auxiliary signals that make a normal and a faulty linear
//! static model distinguishable under bounded noise.
//!
//! The pipeline, module by module:
//!
//! * [`model`] — the two-model system description and its validation;
//! * [`sigma`] — the separability measure σ(θ) as a cone program, plus the
//!   which-model-fits decision for observed data;
//! * [`dual`] — the dual reformulation whose bilinear margin constraint
//!   replaces the bilevel condition σ(θ) ≥ 1, with the eigen split and
//!   linearization used to convexify it;
//! * [`ccp`] — the penalty convex-concave iteration that minimizes the signal
//!   cost subject to the linearized margin, with multistart and primal
//!   re-verification;
//! * [`conic`] — the one second-order cone backend all of the above solve
//!   through;
//! * [`distance`] — a distance-protection instance where the signal is an
//!   injected negative-sequence current phasor, with the feasibility-grid and
//!   fault-reactance sweep experiments.

pub mod ccp;
pub mod conic;
pub mod distance;
pub mod dual;
pub mod model;
pub mod sigma;

pub use ccp::{design, CcpConfig, DesignResult, DesignStatus};
pub use model::{DesignProblem, StaticModel, Violation};
pub use sigma::{classify, evaluate_sigma, min_noise, Classification, SigmaResult, Verdict};
