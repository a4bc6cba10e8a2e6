//! Estimators of the mixture mean `eta_G = E_G eta(theta)`: the GMLE plug-in,
//! the respondents-only average, and the weighted-average sketch `M-hat`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{GmleError, Result};
use crate::mixture::{CensoringMode, MixingDistribution, ObservationSet, Outcome};
use crate::models::{response_bound, ObservationModel};
use crate::solver::FitResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Gmle,
    Naive,
    /// Weighted average `M-hat`; a heuristic with no consistency guarantee.
    Weighted,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Gmle => "gmle",
            EstimatorKind::Naive => "naive",
            EstimatorKind::Weighted => "weighted (heuristic)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Warning {
    /// No observation fell in the response set.
    ResponseSetNeverObserved,
    /// Some grid atom has `P(A) = 0`.
    UnreachableResponseSet,
    /// EM stopped before the KKT gap reached tolerance.
    NotConverged,
}

impl Warning {
    pub fn message(&self) -> &'static str {
        match self {
            Warning::ResponseSetNeverObserved => "A never observed: every record is non-response",
            Warning::UnreachableResponseSet => "grid contains atoms with P(A) = 0 (delta_min = 0)",
            Warning::NotConverged => "EM stopped before the KKT gap reached tolerance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub eta_hat: Vec<f64>,
    pub kind: EstimatorKind,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<Warning>,
}

/// `sum_j w_j eta(theta_j)`.
pub fn plug_in_eta(g: &MixingDistribution, model: &dyn ObservationModel) -> Vec<f64> {
    let mut acc = vec![0.0; model.eta_dim()];
    for (atom, w) in g.grid().iter().zip(g.weights()) {
        if *w == 0.0 {
            continue;
        }
        acc.iter_mut().zip(model.eta(atom)).for_each(|(a, e)| *a += w * e);
    }
    acc
}

/// `sum_{y in A} h(y) f^A_G(y)` over the full model support, the
/// representation of the plug-in estimate through the truncated marginal.
pub fn eta_via_truncated_marginal(g: &MixingDistribution, model: &dyn ObservationModel) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; model.eta_dim()];
    for y in model.support().iter().filter(|y| model.in_response_set(y)) {
        let mut f_a = 0.0;
        for (atom, w) in g.grid().iter().zip(g.weights()) {
            f_a += w * model.density(y, atom, CensoringMode::Truncated)?;
        }
        acc.iter_mut().zip(model.h(y)?).for_each(|(a, hk)| *a += hk * f_a);
    }
    Ok(acc)
}

/// The GMLE plug-in `eta_G-hat`.
pub fn eta_gmle(fit: &FitResult, model: &dyn ObservationModel) -> EstimateReport {
    let delta_min = response_bound(model, fit.g_hat.grid());
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("kkt_gap".into(), fit.kkt_gap);
    diagnostics.insert("n_respondents".into(), fit.n_respondents as f64);
    diagnostics.insert("delta_min".into(), delta_min);
    diagnostics.insert("iterations".into(), fit.iterations as f64);

    let mut warnings = Vec::new();
    if fit.n_respondents == 0 {
        warnings.push(Warning::ResponseSetNeverObserved);
    }
    if !(delta_min > 0.0) {
        warnings.push(Warning::UnreachableResponseSet);
    }
    if !fit.converged {
        warnings.push(Warning::NotConverged);
    }
    EstimateReport {
        eta_hat: plug_in_eta(&fit.g_hat, model),
        kind: EstimatorKind::Gmle,
        diagnostics,
        warnings,
    }
}

/// Count-weighted mean of `h(y)` over respondents; non-response is ignored.
pub fn eta_naive(obs: &ObservationSet, model: &dyn ObservationModel) -> Result<EstimateReport> {
    let respondents = obs.respondents();
    if respondents == 0 {
        return Err(GmleError::Undefined(
            "naive estimator needs at least one respondent".into(),
        ));
    }
    let mut acc = vec![0.0; model.eta_dim()];
    for (y, c) in obs.entries().iter().filter(|(y, _)| model.in_response_set(y)) {
        acc.iter_mut().zip(model.h(y)?).for_each(|(a, hk)| *a += *c as f64 * hk);
    }
    acc.iter_mut().for_each(|a| *a /= respondents as f64);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("n_respondents".into(), respondents as f64);
    Ok(EstimateReport {
        eta_hat: acc,
        kind: EstimatorKind::Naive,
        diagnostics,
        warnings: Vec::new(),
    })
}

const GAMMA_SUM_TOL: f64 = 1e-10;

/// Weighted average of `eta(theta_i)` with item weights `gamma_i`.
///
/// `E-hat = eta_G-hat - (1/n) sum_resp h(Y_i)` is the GMLE-inferred share of
/// the non-respondents in the unweighted mean; spread evenly over the
/// `n - m` non-respondents it gives their inferred mean
/// `E-hat * n / (n - m)`, which then takes the non-respondent weights:
///
/// `M-hat = sum_resp gamma_i h(Y_i) + E-hat * n / (n - m) * sum_nonresp gamma_i`.
///
/// With `gamma_i = 1/n` this is exactly `eta_G-hat`. `items` lists each of the
/// `n` observations with its weight; the fit must come from the same data.
pub fn eta_weighted(items: &[(Outcome, f64)], fit: &FitResult, model: &dyn ObservationModel) -> Result<EstimateReport> {
    if items.len() as u64 != fit.n_observations {
        return Err(GmleError::DimensionMismatch {
            what: "weighted items vs fitted observations",
            expected: fit.n_observations as usize,
            found: items.len(),
        });
    }
    if let Some((_, g)) = items.iter().find(|(_, g)| !(*g >= 0.0) || !g.is_finite()) {
        return Err(GmleError::InvalidWeights(format!(
            "item weight {g} is negative or non-finite"
        )));
    }
    let total: f64 = items.iter().map(|(_, g)| g).sum();
    if libm::fabs(total - 1.0) > GAMMA_SUM_TOL {
        return Err(GmleError::InvalidWeights(format!("item weights sum to {total}")));
    }

    let n = items.len() as f64;
    let dim = model.eta_dim();
    let eta_hat = plug_in_eta(&fit.g_hat, model);
    let mut weighted_resp = vec![0.0; dim];
    let mut mean_resp = vec![0.0; dim];
    let mut nonresp_weight = 0.0;
    let mut nonrespondents = 0usize;
    for (y, gamma) in items {
        if model.in_response_set(y) {
            let h = model.h(y)?;
            for k in 0..dim {
                weighted_resp[k] += gamma * h[k];
                mean_resp[k] += h[k] / n;
            }
        } else {
            nonresp_weight += gamma;
            nonrespondents += 1;
        }
    }
    let e_hat: Vec<f64> = (0..dim).map(|k| eta_hat[k] - mean_resp[k]).collect();
    let m_hat = (0..dim)
        .map(|k| {
            if nonrespondents == 0 {
                weighted_resp[k]
            } else {
                weighted_resp[k] + e_hat[k] * (n / nonrespondents as f64) * nonresp_weight
            }
        })
        .collect();

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("kkt_gap".into(), fit.kkt_gap);
    diagnostics.insert("nonrespondent_weight".into(), nonresp_weight);
    diagnostics.insert("e_hat".into(), e_hat[0]);
    Ok(EstimateReport {
        eta_hat: m_hat,
        kind: EstimatorKind::Weighted,
        diagnostics,
        warnings: Vec::new(),
    })
}
