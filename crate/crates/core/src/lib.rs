//! Laplace mechanisms whose scale parameter is itself randomized.
//!
//! The reciprocal scale 1/b is drawn from a configurable distribution (a
//! non-negative linear combination of five base families); the MGF of that
//! draw gives exact differential-privacy guarantees, the released noise
//! density, utility metrics, and the objective for calibrating the
//! randomizing distribution against an ε budget.
//!
//! Modules:
//! - [`dist`] — the search space: families, combinations, MGF evaluation,
//!   sampling
//! - [`privacy`] — ε guarantees, closed forms, the improvement necessary
//!   condition
//! - [`utility`] — noise pdf/cdf and the ℓ1/ℓ2/entropy/usefulness metrics
//! - [`optimizer`] — constrained search for utility-maximizing parameters
//! - [`mechanism`] — CSV-backed query answering with calibrated noise
//! - [`verify`] — Monte Carlo and grid oracles certifying the formulas

pub mod dist;
pub mod math;
pub mod mechanism;
pub mod optimizer;
pub mod privacy;
pub mod quad;
pub mod solver;
pub mod special;
pub mod utility;
pub mod verify;

pub use dist::{BaseFamily, DistributionSpec, SpecError, TailBound, Term};
pub use privacy::{
    analyze, eps_closed_form, eps_general, gamma_threshold, improvement_criterion,
    necessary_condition, NecessaryCondition, PrivacyReport,
};
pub use mechanism::{
    release, release_batch, sensitivity, Dataset, MechanismError, Query, QueryJob, ReleaseRecord,
};
pub use optimizer::{
    baseline_metric, baseline_usefulness, optimize, optimize_combined, optimize_single, Bounds,
    FamilyKind, Metric, OptimizationProblem, OptimizationResult, OptimizerError, RestartLog,
};
pub use utility::{
    cdf_noise, l1_error, l2_error, pdf_noise, usefulness, utility_report, MetricValue,
    UtilityReport,
};
pub use verify::{
    certify_privacy, certify_privacy_sampled, certify_utility, corpus, verify_spec, MetricCheck,
    PrivacyCertification, SampledCertification, VerificationReport,
};
