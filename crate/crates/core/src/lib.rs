//! Covariate-dependent allocation design for multi-arm trials.

pub mod asymptotic;
pub mod config;
pub mod covariate;
pub mod error;
pub mod ideal;
pub mod linalg;
pub mod optimize;
pub mod presets;
pub mod quadrature;
pub mod real;
pub mod report;
pub mod rules;
pub mod scenario;
pub mod simulate;

pub use asymptotic::{
    asymptotic_limit, limit_from_profile, limit_k_1d, limit_polynomial, limit_two_1d, limit_two_pdim, theta_hat_variance,
    AsymptoticReport, CrossingTerm, LimitFormula,
};
pub use config::{RuleConfig, ScenarioConfig};
pub use covariate::{CovariateModel, GammaCovariate, TabulatedDensity};
pub use error::{DesignError, Result};
pub use ideal::{ideal_regret, ideal_regret_two_closed, prob_select, xi_sq, IdealRegret, QuadConfig};
pub use linalg::SymMatrix;
pub use optimize::{
    evaluate_design, lower_bound_asymptotic, min_variance_bound, optimize_constant, optimize_softmax,
    optimize_softmax_ladder, reconstruct_deterministic, DesignObjective, MomentProfile, NelderMead,
    OptimizationResult, OptimizerConfig, Reconstruction, RestartTrace,
};
pub use real::Real;
pub use rules::{
    arm_moments, psd_gap, two_arm_optimal, AllocationRule, ArmMoment, ArmMoments, PiecewiseRule, SoftmaxRule,
};
pub use scenario::{ArmModel, Basis, Crossing, Scenario};
pub use simulate::{estimate_regret, simulate_trial, ErrorModel, RegretScorer, SimulationConfig, SimulationResult};

pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type Rule64 = AllocationRule<f64>;
pub type Rule32 = AllocationRule<f32>;
