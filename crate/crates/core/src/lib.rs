//! Iterative hard thresholding (IHT) for sparsity-constrained empirical risk
//! minimization, together with stability diagnostics, synthetic-model
//! generators, population-risk evaluation and an experiment harness that
//! reproduces the sparse excess-risk scaling behaviour of the solver on
//! linear and logistic regression models.
//!
//! The solver iterates a gradient step followed by the top-k magnitude
//! projection,
//!
//! ```text
//! w_{t} = H_k( w_{t-1} - eta * grad F_S(w_{t-1}) ),   w_0 = 0,
//! ```
//!
//! optionally refitting an exact restricted minimizer over the final
//! support. The diagnostics quantify how robust the selected support is:
//! hard-thresholding margins along the trajectory, agreement between
//! empirical and population supports, and leave-one-out uniform-stability
//! estimates for the l2-regularized restricted estimator.

pub mod error;
pub mod experiment;
pub mod linalg;
pub mod loss;
pub mod plot;
pub mod risk;
pub mod rng;
pub mod solver;
pub mod stability;
pub mod stats;
pub mod synth;

pub use error::{IhtError, Result};
pub use linalg::{hard_threshold, thresholding_margin, top_eigenvalue, DenseMatrix, DenseVector, SupportSet};
pub use loss::{
    empirical_gradient, empirical_risk, estimate_constants, loss_value, restricted_gradient,
    ConstantEstimates, Dataset, LossModel,
};
pub use risk::{
    excess_risk, gradient_concentration_check, optimal_sparse_risk, population_risk_linear,
    population_risk_mc, RiskEstimate,
};
pub use solver::{iht_run, refit, regularized_restricted_erm, restricted_erm, IhtConfig, IhtTrace, StepSize};
pub use stability::{
    iht_stability_trace, loo_uniform_stability, population_iht_linear_oracle, strong_signal_predicate,
    support_overlap, StabilityReport,
};
pub use synth::{gen_gap_model, gen_linear, gen_logistic, misspecify, GenerativeSpec, ModelKind};
