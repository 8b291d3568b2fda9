//! Experiment pipeline: modulated families, scaling reduction, growth-bound
//! certificates, the identity suite and the command-line interface.

pub mod certify;
pub mod cli;
pub mod family;
pub mod identities;
pub mod plot;

pub use certify::{
    fit_growth_exponent, growth_bound_experiment, growth_bound_experiment_with, scaling_reduction, Certificate,
    DataSpec, ExperimentConfig, ExperimentRecord, ScalingReduction,
};
pub use cli::run_cli;
pub use family::{modulated_family_sum, FamilyMode, FamilyOptions, FamilyReport};
pub use identities::{identity_suite, IdentityOptions, IdentityReport};
