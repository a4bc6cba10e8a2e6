//! Generalized maximum likelihood estimation of a mixing distribution on a
//! finite parameter grid, for observation models with non-response.
//!
//! The crate is `no_std` and needs only `alloc`. The typical flow:
//!
//! 1. pick an [`models::ObservationModel`] and a [`grid::ParameterGrid`],
//! 2. collect data into an [`mixture::ObservationSet`],
//! 3. [`solver::fit`] the mixing distribution by EM,
//! 4. read off the mixture mean with [`estimators::eta_gmle`].
//!
//! The plug-in mean `E_G-hat eta(theta)` is well defined even when the
//! fitted mixing distribution is not: every maximizer has the same fitted
//! marginals on the observed outcomes, and when `eta(theta)` is the
//! conditional mean of a statistic `h(Y)` over the response set, the plug-in
//! mean only depends on those marginals.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod grid;
pub mod mixture;
pub mod models;
pub mod rng;
pub mod sim;
pub mod solver;

pub use error::{GmleError, Result};
pub use estimators::{eta_gmle, eta_naive, eta_weighted, EstimateReport, EstimatorKind};
pub use grid::{ParameterAtom, ParameterGrid};
pub use mixture::{
    log_likelihood, marginal_density, posterior_weights, CensoringMode, LikelihoodMatrix, MixingDistribution,
    ObservationSet, Outcome,
};
pub use models::{Model, ObservationModel};
pub use solver::{em_step, fit, multi_start_fit, FitResult, InitScheme, SolverConfig};
