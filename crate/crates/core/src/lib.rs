//! Exact gradient-descent dynamics for (ridge) least squares under arbitrary
//! learning-rate schedules.
//!
//! The contraction factor phi(k; zeta) = prod_{i<=k} (1 - eta_i zeta) drives
//! everything: the closed-form iterate ([`trajectory`]), the expected excess
//! risk curve ([`risk`]), the generalized ridge penalty reproducing an early
//! stopped solution ([`equivalence`]) and stopping-time estimates
//! ([`stopping`]).

pub mod equivalence;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod phi;
pub mod risk;
pub mod rng;
pub mod schedule;
pub mod special;
pub mod spectral;
pub mod stopping;
pub mod trajectory;

pub use equivalence::{
    gen_ridge_min_norm, one_step_ridge, ridge_matrix_from_stop, verify_equivalence, EquivalenceReport, GeneralizedRidge,
};
pub use error::{Error, Result};
pub use linalg::{thin_svd, ThinSvd};
pub use phi::{
    phi_closed_additive, phi_closed_constant, phi_closed_exponential, phi_closed_polynomial, phi_derivative,
    phi_extended, phi_limit, phi_product, PhiDiagonal, PhiTracker, PhiValue,
};
pub use risk::{
    benefit_condition, excess_risk_of, mc_risk, mc_risk_curve, per_coordinate_optimal_risk, risk_curve_analytic,
    risk_curve_dense, risk_curve_empirical, risk_derivative, risk_extended, risk_lower_bound, BenefitReport,
    LowerBound, McConfig, McEngine, McEstimate, NoiseKind, PriorMode, RiskCurve, RiskModel, Verdict,
};
pub use schedule::Schedule;
pub use special::{qpochhammer_finite, qpochhammer_infinite};
pub use spectral::{ProblemSpec, SpectralData, DEFAULT_RANK_TOL};
pub use stopping::{
    aggregate_stop, per_direction_stop, raskutti_stop, stopping_report, true_optimal_stop, DirectionStop, RatePairing,
    StoppingReport,
};
pub use trajectory::{closed_form_beta, convergence_limit, gd_final, gd_run, gd_step, TrajectoryPoint};
