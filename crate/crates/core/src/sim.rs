//! Replicated simulation studies comparing the naive and GMLE estimators on
//! strata-binomial populations.
//!
//! Replication `r` of design `d` draws from the stream seeded with
//! `split_seed(split_seed(master_seed, d), r)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::{GmleError, Result};
use crate::estimators::{eta_gmle, eta_naive};
use crate::grid::{ParameterAtom, ParameterGrid};
use crate::mixture::{CensoringMode, ObservationSet};
use crate::models::{ObservationModel, StrataBinomialModel};
use crate::rng;
use crate::solver::{fit, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationKind {
    /// Half the strata at `pi = p = 0.5 - delta`, half at `0.5 + delta`.
    TwoPointSymmetric { delta: f64 },
    /// Half the strata with `pi, p ~ U(lo1, hi1)` independently, the other
    /// half with `pi, p ~ U(lo2, hi2)`.
    TwoBlockUniform { lo1: f64, hi1: f64, lo2: f64, hi2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSpec {
    pub kind: PopulationKind,
    pub n_strata: usize,
    /// Attempted sample size per stratum.
    pub kappa: u32,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_strata < 2 || !self.n_strata.is_multiple_of(2) {
            return Err(GmleError::InvalidConfig(format!(
                "n_strata must be even and at least 2, got {}",
                self.n_strata
            )));
        }
        if self.kappa == 0 {
            return Err(GmleError::InvalidConfig("kappa must be positive".into()));
        }
        match self.kind {
            PopulationKind::TwoPointSymmetric { delta } if !(delta > 0.0 && delta < 0.5) => Err(
                GmleError::InvalidConfig(format!("delta must lie in (0, 0.5), got {delta}")),
            ),
            PopulationKind::TwoBlockUniform { lo1, hi1, lo2, hi2 }
                if !(0.0 <= lo1 && lo1 <= hi1 && hi1 <= 1.0 && 0.0 <= lo2 && lo2 <= hi2 && hi2 <= 1.0) =>
            {
                Err(GmleError::InvalidConfig("uniform blocks must lie inside [0, 1]".into()))
            }
            _ => Ok(()),
        }
    }

    /// Population mean of `p`, the estimand.
    pub fn true_eta(&self) -> f64 {
        match self.kind {
            PopulationKind::TwoPointSymmetric { .. } => 0.5,
            PopulationKind::TwoBlockUniform { lo1, hi1, lo2, hi2 } => ((lo1 + hi1) / 2.0 + (lo2 + hi2) / 2.0) / 2.0,
        }
    }

    /// The design parameter shown in table rows.
    pub fn design_label(&self) -> f64 {
        match self.kind {
            PopulationKind::TwoPointSymmetric { delta } => delta,
            PopulationKind::TwoBlockUniform { .. } => self.kappa as f64,
        }
    }
}

/// Table 1 designs: two-point populations with `delta` in {0.3, 0.2, 0.1},
/// 1000 strata, `kappa = 4`.
pub fn table1_specs() -> Vec<PopulationSpec> {
    [0.3, 0.2, 0.1]
        .into_iter()
        .map(|delta| PopulationSpec {
            kind: PopulationKind::TwoPointSymmetric { delta },
            n_strata: 1000,
            kappa: 4,
        })
        .collect()
}

/// Table 2 designs: uniform blocks U(0.1, 0.6) / U(0.4, 0.9), 1000 strata,
/// `kappa` in 1..=5.
pub fn table2_specs() -> Vec<PopulationSpec> {
    (1..=5)
        .map(|kappa| PopulationSpec {
            kind: PopulationKind::TwoBlockUniform {
                lo1: 0.1,
                hi1: 0.6,
                lo2: 0.4,
                hi2: 0.9,
            },
            n_strata: 1000,
            kappa,
        })
        .collect()
}

/// One `(pi, p)` atom per stratum; the first half belongs to the first type.
pub fn generate_population(spec: &PopulationSpec, rng: &mut dyn RngCore) -> Result<Vec<ParameterAtom>> {
    spec.validate()?;
    let half = spec.n_strata / 2;
    let mut atoms = Vec::with_capacity(spec.n_strata);
    for i in 0..spec.n_strata {
        let first = i < half;
        let (pi, p) = match spec.kind {
            PopulationKind::TwoPointSymmetric { delta } => {
                let v = if first { 0.5 - delta } else { 0.5 + delta };
                (v, v)
            }
            PopulationKind::TwoBlockUniform { lo1, hi1, lo2, hi2 } => {
                let (lo, hi) = if first { (lo1, hi1) } else { (lo2, hi2) };
                (rng::uniform_in(rng, lo, hi), rng::uniform_in(rng, lo, hi))
            }
        };
        atoms.push(ParameterAtom::new(alloc::vec![pi, p])?);
    }
    Ok(atoms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub naive: f64,
    pub gmle: f64,
    pub kkt_gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Draw a population and one outcome per stratum, then compute both
/// estimators (GMLE fitted in censored mode).
pub fn run_replication(
    spec: &PopulationSpec,
    grid: &Arc<ParameterGrid>,
    config: &SolverConfig,
    rng: &mut dyn RngCore,
) -> Result<ReplicationOutcome> {
    let model = StrataBinomialModel::new(spec.kappa)?;
    let population = generate_population(spec, rng)?;
    let obs = ObservationSet::from_outcomes(population.iter().map(|a| model.sample(a, rng)))?;
    replicate_on(&model, &obs, grid, config)
}

/// Both estimators on already-sampled data.
pub fn replicate_on(
    model: &StrataBinomialModel,
    obs: &ObservationSet,
    grid: &Arc<ParameterGrid>,
    config: &SolverConfig,
) -> Result<ReplicationOutcome> {
    let naive = eta_naive(obs, model)?.eta_hat[0];
    let fitted = fit(model, obs, grid, CensoringMode::Censored, config)?;
    Ok(ReplicationOutcome {
        naive,
        gmle: eta_gmle(&fitted, model).eta_hat[0],
        kkt_gap: fitted.kkt_gap,
        converged: fitted.converged,
        iterations: fitted.iterations,
    })
}

/// Mean and standard deviation of one estimator over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationSummary {
    pub estimator: &'static str,
    pub mean: f64,
    /// Sample standard deviation (divisor `n_reps - 1`); `None` for one rep.
    pub sd: Option<f64>,
    pub n_reps: usize,
    pub estimates: Vec<f64>,
}

impl ReplicationSummary {
    pub fn from_estimates(estimator: &'static str, estimates: Vec<f64>) -> Self {
        let n = estimates.len();
        let mean = estimates.iter().sum::<f64>() / n as f64;
        let sd = (n >= 2).then(|| {
            let ss: f64 = estimates.iter().map(|x| (x - mean) * (x - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64)
        });
        Self {
            estimator,
            mean,
            sd,
            n_reps: n,
            estimates,
        }
    }
}

/// One row of a simulation table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub spec: PopulationSpec,
    pub naive: ReplicationSummary,
    pub gmle: ReplicationSummary,
    /// Replications whose fit reached the KKT tolerance.
    pub n_converged: usize,
    pub max_kkt_gap: f64,
}

pub fn replication_seed(master_seed: u64, design: usize, rep: usize) -> u64 {
    rng::split_seed(rng::split_seed(master_seed, design as u64), rep as u64)
}

/// Run `n_reps` replications of every design in order.
pub fn run_table(
    specs: &[PopulationSpec],
    n_reps: usize,
    grid: &Arc<ParameterGrid>,
    config: &SolverConfig,
    master_seed: u64,
) -> Result<Vec<TableRow>> {
    run_table_with(specs, n_reps, grid, config, master_seed, |_, _| {})
}

/// [`run_table`] with a progress callback invoked after every replication
/// with `(design index, replication index)`.
pub fn run_table_with<P: FnMut(usize, usize)>(
    specs: &[PopulationSpec],
    n_reps: usize,
    grid: &Arc<ParameterGrid>,
    config: &SolverConfig,
    master_seed: u64,
    mut progress: P,
) -> Result<Vec<TableRow>> {
    if n_reps == 0 {
        return Err(GmleError::InvalidConfig("n_reps must be positive".into()));
    }
    config.validate()?;
    let mut rows = Vec::with_capacity(specs.len());
    for (d, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let mut naive = Vec::with_capacity(n_reps);
        let mut gmle = Vec::with_capacity(n_reps);
        let mut n_converged = 0;
        let mut max_kkt_gap: f64 = 0.0;
        for r in 0..n_reps {
            let mut stream = rng::stream(replication_seed(master_seed, d, r));
            let out = run_replication(spec, grid, config, &mut stream).map_err(|e| GmleError::Replication {
                design: d,
                rep: r,
                source: Box::new(e),
            })?;
            naive.push(out.naive);
            gmle.push(out.gmle);
            n_converged += out.converged as usize;
            max_kkt_gap = max_kkt_gap.max(out.kkt_gap);
            progress(d, r);
        }
        rows.push(TableRow {
            spec: *spec,
            naive: ReplicationSummary::from_estimates("naive", naive),
            gmle: ReplicationSummary::from_estimates("gmle", gmle),
            n_converged,
            max_kkt_gap,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::axis_with_step;
    use alloc::vec;

    #[test]
    fn two_point_population() {
        let spec = table1_specs()[0];
        let atoms = generate_population(&spec, &mut rng::stream(1)).unwrap();
        assert_eq!(atoms.len(), 1000);
        let low = atoms.iter().filter(|a| a.coords() == [0.5 - 0.3, 0.5 - 0.3]).count();
        let high = atoms.iter().filter(|a| a.coords() == [0.5 + 0.3, 0.5 + 0.3]).count();
        assert_eq!((low, high), (500, 500));
        assert_eq!(spec.true_eta(), 0.5);
    }

    #[test]
    fn uniform_blocks_population() {
        let spec = table2_specs()[2];
        assert!((spec.true_eta() - 0.5).abs() < 1e-15);
        let atoms = generate_population(&spec, &mut rng::stream(5)).unwrap();
        assert!(atoms[..500]
            .iter()
            .all(|a| (0.1..0.6).contains(&a[0]) && (0.1..0.6).contains(&a[1])));
        assert!(atoms[500..]
            .iter()
            .all(|a| (0.4..0.9).contains(&a[0]) && (0.4..0.9).contains(&a[1])));
        let a = generate_population(&spec, &mut rng::stream(5)).unwrap();
        assert_eq!(a, atoms);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = table1_specs()[0];
        spec.kind = PopulationKind::TwoPointSymmetric { delta: 0.5 };
        assert!(spec.validate().is_err());
        spec.kind = PopulationKind::TwoPointSymmetric { delta: 0.2 };
        spec.n_strata = 7;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = ReplicationSummary::from_estimates("x", vec![0.4, 0.4]);
        assert_eq!(s.sd, Some(0.0));
        let s = ReplicationSummary::from_estimates("x", vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, Some(1.0));
        assert_eq!(ReplicationSummary::from_estimates("x", vec![1.0]).sd, None);
    }

    #[test]
    fn replication_is_deterministic() {
        let spec = PopulationSpec {
            n_strata: 100,
            ..table1_specs()[2]
        };
        let axis = axis_with_step(0.0, 1.0, 0.1).unwrap();
        let grid = Arc::new(ParameterGrid::cartesian(&[axis.clone(), axis]).unwrap());
        let cfg = SolverConfig {
            max_iters: 200,
            ..SolverConfig::default()
        };
        let a = run_replication(&spec, &grid, &cfg, &mut rng::stream(11)).unwrap();
        let b = run_replication(&spec, &grid, &cfg, &mut rng::stream(11)).unwrap();
        assert_eq!(a, b);
    }
}
