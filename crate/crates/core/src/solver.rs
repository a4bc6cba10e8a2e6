//! Grid GMLE by EM on the weight simplex, with a KKT certificate and
//! multi-start fits for exhibiting distinct maximizers.
//!
//! With `d_j(G) = (1/n) sum_i c_i L[i][j] / f_G(y_i)`, the EM update is
//! `w_j <- w_j d_j(G)`, and `G` maximizes the likelihood over the grid iff
//! `max_j d_j(G) <= 1`. The KKT gap `max_j d_j - 1` also bounds the
//! sub-optimality: `l(G*) - l(G) <= n * gap`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{GmleError, Result};
use crate::grid::ParameterGrid;
use crate::mixture::{
    first_unexplained, marginals_unchecked, weighted_log_sum, CensoringMode, LikelihoodMatrix, MixingDistribution,
    ObservationSet, WEIGHT_SUM_TOL,
};
use crate::models::ObservationModel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    Uniform,
    DirichletRandom(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative log-likelihood change below which EM counts as stalled.
    pub rel_tol: f64,
    /// KKT gap at or below which a fit is certified optimal.
    pub kkt_tol: f64,
    pub n_starts: usize,
    pub init_scheme: InitScheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            rel_tol: 1e-10,
            kkt_tol: 1e-6,
            n_starts: 10,
            init_scheme: InitScheme::Uniform,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(GmleError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) || !(self.kkt_tol > 0.0) {
            return Err(GmleError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(GmleError::InvalidConfig("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub g_hat: MixingDistribution,
    /// Log-likelihood of the initial weights and of every EM iterate.
    pub loglik_trace: Vec<f64>,
    /// `f_G-hat(y_i)` for each observation entry.
    pub fitted_marginals: Vec<f64>,
    pub kkt_gap: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest `|sum(w) - 1|` seen before renormalizing an EM iterate.
    pub max_normalization_drift: f64,
    pub n_observations: u64,
    pub n_respondents: u64,
    pub mode: CensoringMode,
}

impl FitResult {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }

    /// True when EM drifted off the simplex by more than the weight tolerance
    /// at some step.
    pub fn had_normalization_drift(&self) -> bool {
        self.max_normalization_drift > WEIGHT_SUM_TOL
    }
}

/// `d_j = (1/n) sum_i c_i L[i][j] / f_i` for all atoms.
fn gradient_ratios(obs: &ObservationSet, l: &LikelihoodMatrix, marginals: &[f64]) -> Vec<f64> {
    let mut d = alloc::vec![0.0; l.cols()];
    gradient_ratios_into(obs, l, marginals, &mut d);
    d
}

fn gradient_ratios_into(obs: &ObservationSet, l: &LikelihoodMatrix, marginals: &[f64], d: &mut [f64]) {
    let n = obs.n() as f64;
    d.iter_mut().for_each(|x| *x = 0.0);
    for (i, ((_, c), f)) in obs.entries().iter().zip(marginals).enumerate() {
        let scale = *c as f64 / (n * f);
        for (dj, lij) in d.iter_mut().zip(l.row(i)) {
            *dj += scale * lij;
        }
    }
}

fn kkt_gap_of(d: &[f64]) -> f64 {
    d.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0
}

fn check_inputs(g: &MixingDistribution, obs: &ObservationSet, l: &LikelihoodMatrix) -> Result<Vec<f64>> {
    l.check_rows(obs)?;
    l.check_cols(g)?;
    let f = marginals_unchecked(g.weights(), l);
    if let Some(i) = first_unexplained(&f) {
        return Err(GmleError::ZeroMarginal {
            outcome: l.outcomes()[i],
        });
    }
    Ok(f)
}

/// One EM update `w_j <- w_j d_j(G)`, renormalized onto the simplex.
pub fn em_step(g: &MixingDistribution, obs: &ObservationSet, l: &LikelihoodMatrix) -> Result<MixingDistribution> {
    let f = check_inputs(g, obs, l)?;
    let d = gradient_ratios(obs, l, &f);
    let masses = g.weights().iter().zip(&d).map(|(w, dj)| w * dj).collect();
    MixingDistribution::normalized(g.grid().clone(), masses).map(|(g, _)| g)
}

/// KKT gap `max_j d_j(G) - 1` of an arbitrary mixing distribution.
pub fn kkt_gap(g: &MixingDistribution, obs: &ObservationSet, l: &LikelihoodMatrix) -> Result<f64> {
    let f = check_inputs(g, obs, l)?;
    Ok(kkt_gap_of(&gradient_ratios(obs, l, &f)))
}

/// Run EM from `init` on a prepared likelihood matrix.
///
/// Stops when the KKT gap is within `kkt_tol` and the relative
/// log-likelihood change has fallen below `rel_tol` (a gap within tolerance
/// at the initial point stops immediately), or after `max_iters` updates.
pub fn fit_from(
    init: MixingDistribution,
    obs: &ObservationSet,
    l: &LikelihoodMatrix,
    config: &SolverConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_inputs(&init, obs, l)?;
    let grid = init.grid().clone();
    let mut weights = init.weights().to_vec();
    let mut trace = Vec::new();
    let mut drift: f64 = 0.0;
    let mut iterations = 0;
    let mut d = alloc::vec![0.0; l.cols()];

    let (marginals, gap) = loop {
        let f = marginals_unchecked(&weights, l);
        if let Some(i) = first_unexplained(&f) {
            return Err(GmleError::ZeroMarginal {
                outcome: l.outcomes()[i],
            });
        }
        let ll = weighted_log_sum(obs, &f);
        gradient_ratios_into(obs, l, &f, &mut d);
        let gap = kkt_gap_of(&d);
        let stalled = match trace.last() {
            None => true,
            Some(prev) => libm::fabs(ll - prev) <= config.rel_tol * libm::fabs(ll).max(f64::MIN_POSITIVE),
        };
        trace.push(ll);
        if (gap <= config.kkt_tol && stalled) || iterations >= config.max_iters {
            break (f, gap);
        }
        let mut total = 0.0;
        for (w, dj) in weights.iter_mut().zip(&d) {
            *w *= dj;
            total += *w;
        }
        drift = drift.max(libm::fabs(total - 1.0));
        let inv = 1.0 / total;
        weights.iter_mut().for_each(|w| *w *= inv);
        iterations += 1;
    };

    Ok(FitResult {
        g_hat: MixingDistribution::new(grid, weights)?,
        loglik_trace: trace,
        fitted_marginals: marginals,
        kkt_gap: gap,
        converged: gap <= config.kkt_tol,
        iterations,
        max_normalization_drift: drift,
        n_observations: obs.n(),
        n_respondents: obs.respondents(),
        mode: l.mode(),
    })
}

fn initial_weights(grid: &Arc<ParameterGrid>, scheme: InitScheme) -> MixingDistribution {
    match scheme {
        InitScheme::Uniform => MixingDistribution::uniform(grid.clone()),
        InitScheme::DirichletRandom(seed) => {
            let mut stream = rng::stream(seed);
            let w = rng::dirichlet_ones(&mut stream, grid.len());
            MixingDistribution::normalized(grid.clone(), w)
                .map(|(g, _)| g)
                .unwrap_or_else(|_| MixingDistribution::uniform(grid.clone()))
        }
    }
}

fn check_mode(obs: &ObservationSet, mode: CensoringMode) -> Result<()> {
    let has_nr = obs.respondents() < obs.n();
    if mode == CensoringMode::Truncated && has_nr {
        return Err(GmleError::InvalidConfig(
            "truncated fits take respondents only; drop non-response records or use censored mode".into(),
        ));
    }
    Ok(())
}

/// Fit a GMLE for `obs` over `grid` from the configured initial weights.
pub fn fit(
    model: &dyn ObservationModel,
    obs: &ObservationSet,
    grid: &Arc<ParameterGrid>,
    mode: CensoringMode,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_mode(obs, mode)?;
    let l = LikelihoodMatrix::build(model, obs, grid, mode)?;
    fit_from(initial_weights(grid, config.init_scheme), obs, &l, config)
}

/// Seed of start `s` in a multi-start run.
pub fn start_seed(base: u64, start: usize) -> u64 {
    rng::split_seed(base, start as u64)
}

/// Independent fits from Dirichlet(1, .., 1) starting weights, returned in
/// start order. Start `s` uses seed `start_seed(base, s)` where `base` is the
/// seed in `config.init_scheme` (0 for `Uniform`).
pub fn multi_start_fit(
    model: &dyn ObservationModel,
    obs: &ObservationSet,
    grid: &Arc<ParameterGrid>,
    mode: CensoringMode,
    config: &SolverConfig,
) -> Result<Vec<FitResult>> {
    if config.n_starts < 2 {
        return Err(GmleError::InvalidConfig(format!(
            "multi-start needs at least 2 starts, got {}",
            config.n_starts
        )));
    }
    check_mode(obs, mode)?;
    let base = match config.init_scheme {
        InitScheme::DirichletRandom(seed) => seed,
        InitScheme::Uniform => 0,
    };
    let l = LikelihoodMatrix::build(model, obs, grid, mode)?;
    (0..config.n_starts)
        .map(|s| {
            let init = initial_weights(grid, InitScheme::DirichletRandom(start_seed(base, s)));
            fit_from(init, obs, &l, config)
        })
        .collect()
}

/// Pairwise comparison of two fits on the same data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiscrepancy {
    pub max_marginal_diff: f64,
    pub max_weight_diff: f64,
}

pub fn discrepancy(a: &FitResult, b: &FitResult) -> FitDiscrepancy {
    let linf = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max);
    FitDiscrepancy {
        max_marginal_diff: linf(&a.fitted_marginals, &b.fitted_marginals),
        max_weight_diff: linf(a.g_hat.weights(), b.g_hat.weights()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{marginal_density, Outcome};
    use crate::models::BernoulliModel;
    use alloc::vec;

    fn hand() -> (MixingDistribution, ObservationSet, LikelihoodMatrix) {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.5, 0.25]).unwrap());
        let g = MixingDistribution::new(grid, vec![0.5, 0.5]).unwrap();
        let obs =
            ObservationSet::from_counts(vec![(Outcome::Observed(0, 0), 1), (Outcome::Observed(1, 0), 1)]).unwrap();
        let l = LikelihoodMatrix::from_rows(&[vec![0.5, 0.25], vec![0.5, 0.75]], CensoringMode::Full).unwrap();
        (g, obs, l)
    }

    #[test]
    fn em_step_hand_example() {
        let (g, obs, l) = hand();
        let next = em_step(&g, &obs, &l).unwrap();
        assert!((next.weights()[0] - 8.0 / 15.0).abs() < 1e-15);
        assert!((next.weights()[1] - 7.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn em_step_fixed_points() {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.4]).unwrap());
        let g = MixingDistribution::uniform(grid);
        let obs = ObservationSet::from_counts(vec![(Outcome::Observed(0, 0), 3)]).unwrap();
        let l = LikelihoodMatrix::from_rows(&[vec![0.6]], CensoringMode::Full).unwrap();
        assert_eq!(em_step(&g, &obs, &l).unwrap().weights(), &[1.0]);

        // identical columns: flat direction, EM does not move
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.1, 0.2, 0.3]).unwrap());
        let g = MixingDistribution::new(grid, vec![0.2, 0.5, 0.3]).unwrap();
        let obs =
            ObservationSet::from_counts(vec![(Outcome::Observed(0, 0), 2), (Outcome::Observed(1, 0), 5)]).unwrap();
        let l = LikelihoodMatrix::from_rows(&[vec![0.3; 3], vec![0.7; 3]], CensoringMode::Full).unwrap();
        let next = em_step(&g, &obs, &l).unwrap();
        for (a, b) in next.weights().iter().zip(g.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn em_step_zero_marginal_names_outcome() {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.1, 0.2]).unwrap());
        let g = MixingDistribution::point_mass(grid, 0).unwrap();
        let obs =
            ObservationSet::from_counts(vec![(Outcome::Observed(0, 0), 1), (Outcome::Observed(1, 0), 1)]).unwrap();
        let l = LikelihoodMatrix::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.5]], CensoringMode::Full).unwrap();
        match em_step(&g, &obs, &l) {
            Err(GmleError::ZeroMarginal { outcome }) => assert_eq!(outcome, Outcome::Observed(0, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_atom_fit_stops_immediately() {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.3]).unwrap());
        let obs = ObservationSet::from_outcomes([Outcome::Observed(1, 1), Outcome::Observed(0, 1)]).unwrap();
        let r = fit(
            &BernoulliModel,
            &obs,
            &grid,
            CensoringMode::Full,
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(r.g_hat.weights(), &[1.0]);
        assert_eq!(r.iterations, 0);
        assert!(r.kkt_gap.abs() < 1e-15);
        assert!(r.converged);
    }

    #[test]
    fn example_one_marginals_are_one_half() {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.25, 0.5, 0.75]).unwrap());
        let obs =
            ObservationSet::from_counts(vec![(Outcome::Observed(0, 1), 5), (Outcome::Observed(1, 1), 5)]).unwrap();
        let r = fit(
            &BernoulliModel,
            &obs,
            &grid,
            CensoringMode::Full,
            &SolverConfig::default(),
        )
        .unwrap();
        for f in &r.fitted_marginals {
            assert!((f - 0.5).abs() < 1e-12);
        }
        let l = LikelihoodMatrix::build(&BernoulliModel, &obs, &grid, CensoringMode::Full).unwrap();
        assert_eq!(marginal_density(&r.g_hat, &l).unwrap(), r.fitted_marginals);
    }

    #[test]
    fn multi_start_requires_two() {
        let grid = Arc::new(ParameterGrid::from_scalars(&[0.3, 0.6]).unwrap());
        let obs = ObservationSet::from_outcomes([Outcome::Observed(1, 1)]).unwrap();
        let cfg = SolverConfig {
            n_starts: 1,
            ..SolverConfig::default()
        };
        assert!(multi_start_fit(&BernoulliModel, &obs, &grid, CensoringMode::Full, &cfg).is_err());
    }

    #[test]
    fn truncated_mode_rejects_non_response_data() {
        let m = crate::models::StrataBinomialModel::new(2).unwrap();
        let grid = Arc::new(ParameterGrid::cartesian(&[vec![0.5], vec![0.5]]).unwrap());
        let obs = ObservationSet::from_outcomes([Outcome::NonResponse, Outcome::Observed(1, 2)]).unwrap();
        assert!(fit(&m, &obs, &grid, CensoringMode::Truncated, &SolverConfig::default()).is_err());
        let resp = obs.respondents_only().unwrap();
        assert!(fit(&m, &resp, &grid, CensoringMode::Truncated, &SolverConfig::default()).is_ok());
    }
}
