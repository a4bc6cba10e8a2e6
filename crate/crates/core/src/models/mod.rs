//! Observation models: component densities `f(y | theta)`, the response set
//! `A`, the statistic `h(y)` and target `eta(theta)`, and samplers.
//!
//! Every model here has a finite support and satisfies
//! `eta(theta) = E_theta[h(Y) | Y in A]`, which is what makes the plug-in
//! `eta_G-hat` the same for every maximizer of the mixture likelihood.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{GmleError, Result};
use crate::grid::{ParameterAtom, ParameterGrid};
use crate::mixture::{CensoringMode, Outcome};

mod bernoulli;
pub mod pmf;
mod poisson_binomial;
mod strata_binomial;
mod survey_geometric;

pub use bernoulli::BernoulliModel;
pub use poisson_binomial::PoissonBinomialModel;
pub use strata_binomial::StrataBinomialModel;
pub use survey_geometric::SurveyGeometricModel;

/// Tolerance used by the Assumption 1(i) identity check.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Contract shared by all observation models.
///
/// `full_density` and `response_prob` assume the atom has passed
/// `validate_atom`; `density` adds the censoring-mode logic on top.
pub trait ObservationModel {
    fn name(&self) -> &'static str;

    /// Every outcome with positive probability for some valid atom.
    fn support(&self) -> Vec<Outcome>;

    fn in_support(&self, y: &Outcome) -> bool;

    /// Check coordinate count and ranges.
    fn validate_atom(&self, atom: &ParameterAtom) -> Result<()>;

    /// `f(y | theta)` on the untruncated model. For the non-response outcome
    /// this is `P_theta(A^c)`.
    fn full_density(&self, y: &Outcome, atom: &ParameterAtom) -> f64;

    /// `P_theta(Y in A)`.
    fn response_prob(&self, atom: &ParameterAtom) -> f64;

    fn in_response_set(&self, y: &Outcome) -> bool {
        y.is_response()
    }

    /// `h(y)`, defined on the response set only.
    fn h(&self, y: &Outcome) -> Result<Vec<f64>>;

    fn eta(&self, atom: &ParameterAtom) -> Vec<f64>;

    fn eta_dim(&self) -> usize;

    /// One draw from `density(., atom, Censored)`.
    fn sample(&self, atom: &ParameterAtom, rng: &mut dyn RngCore) -> Outcome;

    fn density(&self, y: &Outcome, atom: &ParameterAtom, mode: CensoringMode) -> Result<f64> {
        if !self.in_support(y) {
            return Err(GmleError::OutOfSupport(*y));
        }
        let in_a = self.in_response_set(y);
        match mode {
            CensoringMode::Full | CensoringMode::Censored => Ok(self.full_density(y, atom)),
            CensoringMode::Truncated if !in_a => Err(GmleError::InvalidQuery(format!(
                "truncated density is undefined on outcome {y} outside the response set"
            ))),
            CensoringMode::Truncated => {
                let pa = self.response_prob(atom);
                // an atom that never responds cannot produce a truncated record
                Ok(if pa > 0.0 { self.full_density(y, atom) / pa } else { 0.0 })
            }
        }
    }
}

/// Runtime-selected model, as configured from the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Bernoulli(BernoulliModel),
    StrataBinomial(StrataBinomialModel),
    SurveyGeometric(SurveyGeometricModel),
    PoissonBinomial(PoissonBinomialModel),
}

impl Model {
    pub fn as_dyn(&self) -> &dyn ObservationModel {
        match self {
            Model::Bernoulli(m) => m,
            Model::StrataBinomial(m) => m,
            Model::SurveyGeometric(m) => m,
            Model::PoissonBinomial(m) => m,
        }
    }
}

pub(crate) fn check_unit(what: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(GmleError::InvalidAtom(format!("{what} = {x} is outside [0, 1]")))
    }
}

pub(crate) fn check_dim(atom: &ParameterAtom, expected: usize, layout: &str) -> Result<()> {
    if atom.dim() == expected {
        Ok(())
    } else {
        Err(GmleError::InvalidAtom(format!(
            "expected {expected} coordinates {layout}, found {}",
            atom.dim()
        )))
    }
}

/// `E_theta[h(Y) | A]`, or `None` when `P_theta(A) = 0`.
pub fn conditional_response_mean(model: &dyn ObservationModel, atom: &ParameterAtom) -> Option<Vec<f64>> {
    let pa = model.response_prob(atom);
    if !(pa > 0.0) {
        return None;
    }
    let mut acc = alloc::vec![0.0; model.eta_dim()];
    for y in model.support().iter().filter(|y| model.in_response_set(y)) {
        let f = model.full_density(y, atom);
        let h = model.h(y).ok()?;
        acc.iter_mut().zip(&h).for_each(|(a, hk)| *a += hk * f);
    }
    acc.iter_mut().for_each(|a| *a /= pa);
    Some(acc)
}

/// `|sum_y density(y, atom, Censored) - 1|` over the full support.
pub fn normalization_error(model: &dyn ObservationModel, atom: &ParameterAtom) -> f64 {
    let total: f64 = model
        .support()
        .iter()
        .map(|y| model.density(y, atom, CensoringMode::Censored).unwrap_or(f64::NAN))
        .sum();
    libm::fabs(total - 1.0)
}

/// `min_j P_{theta_j}(A)` over the grid.
pub fn response_bound(model: &dyn ObservationModel, grid: &ParameterGrid) -> f64 {
    grid.iter()
        .map(|a| model.response_prob(a))
        .fold(f64::INFINITY, f64::min)
}

/// Result of checking `eta(theta) = E_theta[h(Y) | A]` and `P_theta(A) > 0`
/// across a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionOneReport {
    /// Largest componentwise residual over atoms with `P(A) > 0`.
    pub max_residual: f64,
    /// Atom index attaining `max_residual`.
    pub worst_atom: Option<usize>,
    /// `min_j P_{theta_j}(A)`.
    pub delta_min: f64,
    pub identity_holds: bool,
    pub response_bounded: bool,
}

impl AssumptionOneReport {
    pub fn holds(&self) -> bool {
        self.identity_holds && self.response_bounded
    }

    pub fn describe(&self) -> String {
        let mut s = format!(
            "identity residual {:.3e}, delta_min {:.3e}",
            self.max_residual, self.delta_min
        );
        if !self.identity_holds {
            s.push_str("; eta is not E[h(Y) | A]: plug-in estimate may differ across maximizers");
        }
        if !self.response_bounded {
            s.push_str("; some atoms never respond (P(A) = 0)");
        }
        s
    }
}

/// Check Assumption 1 for a target functional `eta` (usually
/// `model.eta`, but any functional of the atom can be audited).
pub fn check_assumption_one<F>(model: &dyn ObservationModel, grid: &ParameterGrid, eta: F) -> AssumptionOneReport
where
    F: Fn(&ParameterAtom) -> Vec<f64>,
{
    let mut max_residual: f64 = 0.0;
    let mut worst_atom = None;
    for (j, atom) in grid.iter().enumerate() {
        let Some(cond) = conditional_response_mean(model, atom) else {
            continue;
        };
        let target = eta(atom);
        let r = if target.len() == cond.len() {
            target
                .iter()
                .zip(&cond)
                .map(|(a, b)| libm::fabs(a - b))
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        if r > max_residual || worst_atom.is_none() {
            max_residual = max_residual.max(r);
            worst_atom = Some(j);
        }
    }
    let delta_min = response_bound(model, grid);
    AssumptionOneReport {
        max_residual,
        worst_atom,
        delta_min,
        identity_holds: max_residual <= IDENTITY_TOL,
        response_bounded: delta_min > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn truncated_equals_full_when_response_certain() {
        let m = StrataBinomialModel::new(3).unwrap();
        let atom = ParameterAtom::new(vec![1.0, 0.4]).unwrap();
        let y = Outcome::Observed(1, 3);
        assert_eq!(
            m.density(&y, &atom, CensoringMode::Truncated).unwrap(),
            m.density(&y, &atom, CensoringMode::Full).unwrap()
        );
    }

    #[test]
    fn truncated_on_non_response_is_invalid() {
        let m = StrataBinomialModel::new(4).unwrap();
        let atom = ParameterAtom::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            m.density(&Outcome::NonResponse, &atom, CensoringMode::Truncated),
            Err(GmleError::InvalidQuery(_))
        ));
    }

    #[test]
    fn out_of_support_query() {
        let m = StrataBinomialModel::new(2).unwrap();
        let atom = ParameterAtom::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            m.density(&Outcome::Observed(3, 2), &atom, CensoringMode::Full),
            Err(GmleError::OutOfSupport(_))
        ));
    }

    #[test]
    fn squared_target_violates_identity() {
        let m = BernoulliModel;
        let grid = ParameterGrid::from_scalars(&[0.25, 0.5, 0.75]).unwrap();
        let ok = check_assumption_one(&m, &grid, |a| m.eta(a));
        assert!(ok.holds(), "{}", ok.describe());
        let bad = check_assumption_one(&m, &grid, |a| vec![a[0] * a[0]]);
        assert!(!bad.holds());
        assert!((bad.max_residual - 0.25).abs() < 1e-15);
        assert_eq!(bad.worst_atom, Some(1));
    }

    #[test]
    fn zero_response_atoms_are_reported() {
        let m = StrataBinomialModel::new(2).unwrap();
        let grid = ParameterGrid::cartesian(&[vec![0.0, 0.5], vec![0.5]]).unwrap();
        let r = check_assumption_one(&m, &grid, |a| m.eta(a));
        assert!(r.identity_holds);
        assert!(!r.response_bounded);
        assert_eq!(r.delta_min, 0.0);
    }
}
