//! Cautious (worst-case, guaranteed) optimization of an unknown
//! vector-valued function from noisy measurements.
//!
//! The unknown function is parameterized over a finite basis,
//! `phi^theta(z) = theta^T b(z)`, and the measurements plus a quadratic
//! noise model determine the set `Theta = Z(N)` of *all* parameters
//! consistent with the data. Everything downstream reasons over that whole
//! set:
//!
//! - [`bounds`]: guaranteed upper bounds `g`, `g_c` on the norm or any
//!   linear functional of the unknown function, with closed forms and their
//!   LMI counterparts, plus the uncertainties `U`, `U_c`.
//! - [`certificates`]: data-based convexity and Lipschitz certificates,
//!   gradients of the worst-case bound, and set-wise verification through
//!   vertices and coverings.
//! - [`control`]: contraction analysis of unknown nonlinear systems and
//!   suboptimal regulation of unknown linear systems.
//! - [`online`]: the online cautious optimization loop with monotone
//!   certified bounds and a data-based stopping criterion.
//!
//! The LMI feasibility engine ([`lmi`]) is sound for "feasible" verdicts
//! (every certificate is re-verified exactly at the witness) and best-effort
//! for "infeasible": a failed search can only make results more
//! conservative, never wrong.

pub mod basis;
pub mod bounds;
pub mod certificates;
pub mod control;
pub mod data;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lmi;
pub mod online;
pub mod qmi;

pub use basis::{builtin_basis, eval_regressor, BasisSet, Curvature, Family};
pub use bounds::{
    gc_at, global_norm_bound, lambda_inflate, linear_bound_gc, linear_bound_gc_lmi, norm_bound_g,
    norm_bound_g_upper, uncertainty_u, uncertainty_uc, BoundResult, Route,
};
pub use certificates::{
    convexity_certificate, covering_bounds, grad_gc, lipschitz_global_check,
    lipschitz_jacobian_check, lipschitz_pair_check, make_covering, min_jacobian_lipschitz,
    minimize_gc, nonneg_params, vertex_max_bound, ConvexityReport, CoveringGrid, Domain,
    MinimizeOptions, Objective,
};
pub use control::{
    dt_contraction, epsilon_minus, osl_lse_margin, osl_pair_test, osl_upper_estimate,
    quadratic_stability, suboptimal_regulation, transient_bound, ContractionCertificate,
    RegulationOptions, RegulationResult, StabilityCertificate, SystemSet,
};
pub use data::{build_parameter_set, build_system_set, Dataset, SystemDataset};
pub use error::{Error, Result};
pub use lmi::{lmi_affine_feasible, AffineLmi, FeasibilityResult, SolveOptions};
pub use online::{
    combine_datasets, online_local_descent, online_step, shrinkage_experiment, stopping_gap,
    uniform_noise_sample, LocalPattern, MeasurementOracle, NoiseMode, OnlineRunConfig,
    OnlineState, OnlineTrace, ShrinkageConfig, ShrinkageStats,
};
pub use qmi::{
    extremal_member, lse_estimate, qmi_membership, qmi_value, sample_parameter_set,
    schur_complement, validate_noise_model, Membership, NoiseModel, ParameterSet,
    PartitionedSymmetric, SampleMode,
};
