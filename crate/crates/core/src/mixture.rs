//! Mixing distributions, deduplicated observations, likelihood matrices, and
//! the mixture-density arithmetic built on them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{GmleError, Result};
use crate::grid::ParameterGrid;
use crate::models::ObservationModel;

/// Tolerance on `sum(weights) == 1` for a valid mixing distribution.
pub const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Which density an observation is scored with.
///
/// * `Full` is `f(y | theta)`.
/// * `Truncated` is `f(y | theta) / P_theta(A)` on the response set, undefined
///   off it (non-response records were dropped from the data).
/// * `Censored` is `f(y | theta)` on the response set plus the lump
///   `P_theta(A^c)` on the non-response outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CensoringMode {
    Full,
    Truncated,
    Censored,
}

impl fmt::Display for CensoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CensoringMode::Full => "full",
            CensoringMode::Truncated => "truncated",
            CensoringMode::Censored => "censored",
        })
    }
}

impl core::str::FromStr for CensoringMode {
    type Err = GmleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(CensoringMode::Full),
            "truncated" => Ok(CensoringMode::Truncated),
            "censored" => Ok(CensoringMode::Censored),
            other => Err(GmleError::InvalidConfig(format!("unknown censoring mode '{other}'"))),
        }
    }
}

/// A single observed value.
///
/// `Observed(a, b)` is a model specific pair: `(X, kappa*)` for the binomial
/// and Poisson strata models, `(category, attempts)` for the survey model and
/// `(y, 1)` for Bernoulli data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Observed(u32, u32),
    NonResponse,
}

impl Outcome {
    pub fn is_response(&self) -> bool {
        matches!(self, Outcome::Observed(..))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Observed(a, b) => write!(f, "({a}, {b})"),
            Outcome::NonResponse => f.write_str("non-response"),
        }
    }
}

/// Distinct outcomes with positive multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    entries: Vec<(Outcome, u64)>,
    n: u64,
}

impl ObservationSet {
    /// Deduplicate raw observations; entries come out in outcome order.
    pub fn from_outcomes<I: IntoIterator<Item = Outcome>>(outcomes: I) -> Result<Self> {
        let mut counts: BTreeMap<Outcome, u64> = BTreeMap::new();
        for y in outcomes {
            *counts.entry(y).or_insert(0) += 1;
        }
        Self::from_counts(counts.into_iter().collect())
    }

    pub fn from_counts(entries: Vec<(Outcome, u64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(GmleError::InvalidObservations("no observations".into()));
        }
        let mut seen = BTreeMap::new();
        let mut n = 0u64;
        for (i, (y, c)) in entries.iter().enumerate() {
            if *c == 0 {
                return Err(GmleError::InvalidObservations(format!("outcome {y} has count 0")));
            }
            if seen.insert(*y, i).is_some() {
                return Err(GmleError::InvalidObservations(format!("outcome {y} listed twice")));
            }
            n += c;
        }
        Ok(Self { entries, n })
    }

    pub fn entries(&self) -> &[(Outcome, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of observations.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn respondents(&self) -> u64 {
        self.entries
            .iter()
            .filter(|(y, _)| y.is_response())
            .map(|(_, c)| c)
            .sum()
    }

    pub fn count_of(&self, y: &Outcome) -> u64 {
        self.entries.iter().find(|(o, _)| o == y).map_or(0, |(_, c)| *c)
    }

    /// The same data with non-response records removed (for truncated fits).
    pub fn respondents_only(&self) -> Result<Self> {
        Self::from_counts(self.entries.iter().copied().filter(|(y, _)| y.is_response()).collect())
    }
}

/// Probability weights over a grid: the object `G` (or a fitted `G-hat`).
#[derive(Debug, Clone, PartialEq)]
pub struct MixingDistribution {
    grid: Arc<ParameterGrid>,
    weights: Vec<f64>,
}

impl MixingDistribution {
    pub fn new(grid: Arc<ParameterGrid>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(GmleError::DimensionMismatch {
                what: "weights vs grid atoms",
                expected: grid.len(),
                found: weights.len(),
            });
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(GmleError::InvalidWeights(format!("weight {j} is {w}")));
        }
        let total: f64 = weights.iter().sum();
        if libm::fabs(total - 1.0) > WEIGHT_SUM_TOL {
            return Err(GmleError::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self { grid, weights })
    }

    pub fn uniform(grid: Arc<ParameterGrid>) -> Self {
        let m = grid.len();
        Self {
            grid,
            weights: alloc::vec![1.0 / m as f64; m],
        }
    }

    pub fn point_mass(grid: Arc<ParameterGrid>, atom: usize) -> Result<Self> {
        let mut weights = alloc::vec![0.0; grid.len()];
        *weights.get_mut(atom).ok_or(GmleError::DimensionMismatch {
            what: "point-mass atom index",
            expected: grid.len(),
            found: atom,
        })? = 1.0;
        Ok(Self { grid, weights })
    }

    /// Rescale nonnegative masses to sum to one. Returns the distribution and
    /// `|sum - 1|` before rescaling.
    pub fn normalized(grid: Arc<ParameterGrid>, mut masses: Vec<f64>) -> Result<(Self, f64)> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(GmleError::InvalidWeights(format!(
                "cannot normalize total mass {total}"
            )));
        }
        masses.iter_mut().for_each(|w| *w /= total);
        let drift = libm::fabs(total - 1.0);
        Ok((Self::new(grid, masses)?, drift))
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(GmleError::InvalidWeights(
                "mixing distributions on different grids".into(),
            ));
        }
        let w = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Self::normalized(self.grid.clone(), w).map(|(g, _)| g)
    }

    pub fn grid(&self) -> &Arc<ParameterGrid> {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E_G[phi(theta)]` for a scalar functional.
    pub fn expect<F: Fn(&crate::grid::ParameterAtom) -> f64>(&self, phi: F) -> f64 {
        self.grid.iter().zip(&self.weights).map(|(a, w)| w * phi(a)).sum()
    }
}

/// Densities `f(y_i | theta_j)` for every observed outcome (rows) and grid
/// atom (columns), stored row-major in linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    outcomes: Vec<Outcome>,
    mode: CensoringMode,
}

impl LikelihoodMatrix {
    /// Evaluate the model density for every (observed outcome, atom) pair.
    pub fn build(
        model: &dyn ObservationModel,
        obs: &ObservationSet,
        grid: &ParameterGrid,
        mode: CensoringMode,
    ) -> Result<Self> {
        for atom in grid.iter() {
            model.validate_atom(atom)?;
        }
        let mut values = Vec::with_capacity(obs.len() * grid.len());
        for (y, _) in obs.entries() {
            if !model.in_support(y) {
                return Err(GmleError::OutOfSupport(*y));
            }
            for atom in grid.iter() {
                values.push(model.density(y, atom, mode)?);
            }
        }
        let outcomes = obs.entries().iter().map(|(y, _)| *y).collect();
        Self::assemble(obs.len(), grid.len(), values, outcomes, mode)
    }

    /// Matrix from explicit rows; rows are labelled `Observed(i, 0)`.
    pub fn from_rows(rows: &[Vec<f64>], mode: CensoringMode) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(GmleError::DimensionMismatch {
                what: "likelihood row length",
                expected: cols,
                found: bad.len(),
            });
        }
        let values = rows.iter().flatten().copied().collect();
        let outcomes = (0..rows.len() as u32).map(|i| Outcome::Observed(i, 0)).collect();
        Self::assemble(rows.len(), cols, values, outcomes, mode)
    }

    fn assemble(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        outcomes: Vec<Outcome>,
        mode: CensoringMode,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GmleError::DimensionMismatch {
                what: "likelihood matrix must be nonempty",
                expected: 1,
                found: 0,
            });
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(GmleError::NonFiniteLikelihood {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        for (i, row) in values.chunks_exact(cols).enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                return Err(GmleError::UnexplainedOutcome { outcome: outcomes[i] });
            }
        }
        Ok(Self {
            rows,
            cols,
            values,
            outcomes,
            mode,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mode(&self) -> CensoringMode {
        self.mode
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub(crate) fn check_cols(&self, g: &MixingDistribution) -> Result<()> {
        if g.weights().len() != self.cols {
            return Err(GmleError::DimensionMismatch {
                what: "likelihood columns vs grid atoms",
                expected: self.cols,
                found: g.weights().len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_rows(&self, obs: &ObservationSet) -> Result<()> {
        if obs.len() != self.rows {
            return Err(GmleError::DimensionMismatch {
                what: "likelihood rows vs observation entries",
                expected: self.rows,
                found: obs.len(),
            });
        }
        Ok(())
    }
}

/// `f_G(y_i) = sum_j w_j L[i][j]` for every row. A zero entry marks an
/// observed outcome the mixing distribution cannot explain; see
/// [`first_unexplained`].
pub fn marginal_density(g: &MixingDistribution, l: &LikelihoodMatrix) -> Result<Vec<f64>> {
    l.check_cols(g)?;
    Ok(marginals_unchecked(g.weights(), l))
}

pub(crate) fn marginals_unchecked(weights: &[f64], l: &LikelihoodMatrix) -> Vec<f64> {
    (0..l.rows).map(|i| dot(l.row(i), weights)).collect()
}

/// Dot product with eight independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

/// Index of the first row whose marginal density is zero.
pub fn first_unexplained(marginals: &[f64]) -> Option<usize> {
    marginals.iter().position(|&f| !(f > 0.0))
}

/// `sum_i count_i * ln f_G(y_i)`; negative infinity when an observed outcome
/// has zero marginal density.
pub fn log_likelihood(g: &MixingDistribution, obs: &ObservationSet, l: &LikelihoodMatrix) -> Result<f64> {
    l.check_rows(obs)?;
    let f = marginal_density(g, l)?;
    Ok(weighted_log_sum(obs, &f))
}

pub(crate) fn weighted_log_sum(obs: &ObservationSet, marginals: &[f64]) -> f64 {
    let mut total = 0.0;
    for ((_, c), f) in obs.entries().iter().zip(marginals) {
        if !(*f > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += *c as f64 * libm::log(*f);
    }
    total
}

/// Posterior `P(theta_j | y_row)` under prior `g`.
pub fn posterior_weights(g: &MixingDistribution, l: &LikelihoodMatrix, row: usize) -> Result<Vec<f64>> {
    l.check_cols(g)?;
    if row >= l.rows {
        return Err(GmleError::DimensionMismatch {
            what: "posterior row index",
            expected: l.rows,
            found: row,
        });
    }
    let joint: Vec<f64> = l.row(row).iter().zip(g.weights()).map(|(a, w)| a * w).collect();
    let f: f64 = joint.iter().sum();
    if !(f > 0.0) {
        return Err(GmleError::ZeroMarginal {
            outcome: l.outcomes[row],
        });
    }
    Ok(joint.into_iter().map(|p| p / f).collect())
}
