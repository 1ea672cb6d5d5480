//! Minimum description length complexities for multinomial processing tree
//! models: the Fisher information approximation by Monte Carlo integration,
//! exact normalized maximum likelihood by enumeration, and the sample size
//! `N'` above which the two agree on model ranks.

pub mod cli;
pub mod error;
pub mod fia;
pub mod fisher;
pub mod model;
pub mod nml;
pub mod numeric;
pub mod parse;
pub mod reports;
pub mod zoo;

pub use error::{Error, Result};
pub use fia::{
    c_fia, fia_curve, integrate_sqrt_det, integrate_sqrt_det_report, n_prime_pair, n_prime_set,
    ComplexityEstimate, EstimateKind, FiaTerms, IntegrationReport, NPrime, NPrimeResult,
};
pub use fisher::{fisher_information, FisherMatrix};
pub use model::{validate, MptModel, ParameterSpace, Rational, ValidationReport};
pub use nml::{c_nml, nml_curve, nml_stability_audit, Allocation, NmlOptions};
pub use parse::{parse_model, serialize_model};
pub use zoo::{Preset, ZooEntry};
