//! Hard-instance ensembles for distribution property testing.
//!
//! Two ensembles of distributions are built so that every member of the
//! first has a shape property (monotone, or log-concave) while most members
//! of the second are far from it, yet samples from either look alike: each
//! perturbation is drawn from one of two laws that share their first `m - 1`
//! moments. The crate builds the ensembles, certifies both sides, and
//! measures how close the sample distributions are.
//!
//! * [`kernels`]: the moment-matched perturbation laws.
//! * [`ensembles`]: paired-bin ensembles, draws and enumeration.
//! * [`instances`]: the monotone (1-D and `[n]^d`) and log-concave families.
//! * [`oracles`]: membership checks and distance certificates.
//! * [`indist`]: conditional count laws, TV bounds and estimates.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensembles;
pub mod error;
pub mod indist;
pub mod instances;
pub mod kernels;
pub mod oracles;

pub use ensembles::{DiscreteDistribution, Draw, EnsembleSpec, PairPerturbation, Violation, sample_dataset};
pub use error::{Error, Result};
pub use indist::{
    BoundInputs, Branch, McEstimate, PairConditionalPmf, Prop1Bound, Prop1Knobs, TheoremBound, TheoremKnobs,
    TvReport, aggregate_tv_bound, mc_tv_estimate, pair_conditional_pmf, pair_tv, pair_tv_ln, prop1_bound,
    theorem_lower_bound,
};
pub use instances::{Family, HalfcubeLayout, Instance, InstanceParams, build, lift_halfcube, pad_domain, select_m};
pub use kernels::{MomentKernel, Side};
pub use oracles::{CertificateMethod, DistanceCertificate, Order, is_log_concave, is_monotone};
