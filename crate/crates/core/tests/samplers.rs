use std::collections::BTreeMap;

use gmle_core::grid::ParameterAtom;
use gmle_core::models::{
    BernoulliModel, ObservationModel, PoissonBinomialModel, StrataBinomialModel, SurveyGeometricModel,
};
use gmle_core::{rng, CensoringMode, Outcome};

const DRAWS: usize = 1_000_000;

/// Every outcome frequency within 4 standard errors of its censored density.
fn check(model: &dyn ObservationModel, coords: Vec<f64>, seed: u64) {
    let atom = ParameterAtom::new(coords).unwrap();
    let mut r = rng::stream(seed);
    let mut freq: BTreeMap<Outcome, usize> = BTreeMap::new();
    for _ in 0..DRAWS {
        *freq.entry(model.sample(&atom, &mut r)).or_default() += 1;
    }
    for y in freq.keys() {
        assert!(model.in_support(y), "{}: sampled {y} outside support", model.name());
    }
    let n = DRAWS as f64;
    for y in model.support() {
        let p = model.density(&y, &atom, CensoringMode::Censored).unwrap();
        let hat = *freq.get(&y).unwrap_or(&0) as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        assert!(
            (hat - p).abs() <= 4.0 * se + 1e-12,
            "{} at {:?}: outcome {y} freq {hat} vs density {p}",
            model.name(),
            atom.coords()
        );
    }
}

#[test]
fn bernoulli_sampler_matches_density() {
    check(&BernoulliModel, vec![0.37], 1);
}

#[test]
fn strata_sampler_matches_density() {
    check(&StrataBinomialModel::new(4).unwrap(), vec![0.6, 0.3], 2);
}

#[test]
fn survey_sampler_matches_density() {
    check(&SurveyGeometricModel::new(3, 3).unwrap(), vec![0.45, 0.2, 0.5, 0.3], 3);
}

#[test]
fn poisson_sampler_matches_density() {
    check(&PoissonBinomialModel::new(6.0).unwrap(), vec![2.5, 0.4], 4);
}
