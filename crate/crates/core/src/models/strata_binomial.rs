use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::{check_dim, check_unit, pmf, ObservationModel};
use crate::error::{GmleError, Result};
use crate::grid::ParameterAtom;
use crate::mixture::Outcome;
use crate::rng;

/// Strata sampled with `kappa` attempted units each. The number of
/// responders is `kappa* ~ Bin(kappa, pi)` and, given `kappa*`, the number of
/// positives is `X ~ Bin(kappa*, p)`. Atom `(pi, p)`; outcome
/// `Observed(X, kappa*)` for `kappa* >= 1`, `NonResponse` for `kappa* = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrataBinomialModel {
    kappa: u32,
}

impl StrataBinomialModel {
    pub fn new(kappa: u32) -> Result<Self> {
        if kappa == 0 {
            return Err(GmleError::InvalidConfig("kappa must be positive".into()));
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }
}

impl ObservationModel for StrataBinomialModel {
    fn name(&self) -> &'static str {
        "strata-binomial"
    }

    fn support(&self) -> Vec<Outcome> {
        let mut out = vec![Outcome::NonResponse];
        for k in 1..=self.kappa {
            out.extend((0..=k).map(|x| Outcome::Observed(x, k)));
        }
        out
    }

    fn in_support(&self, y: &Outcome) -> bool {
        match *y {
            Outcome::NonResponse => true,
            Outcome::Observed(x, k) => k >= 1 && k <= self.kappa && x <= k,
        }
    }

    fn validate_atom(&self, atom: &ParameterAtom) -> Result<()> {
        check_dim(atom, 2, "(pi, p)")?;
        check_unit("pi", atom[0])?;
        check_unit("p", atom[1])
    }

    fn full_density(&self, y: &Outcome, atom: &ParameterAtom) -> f64 {
        let (pi, p) = (atom[0], atom[1]);
        match *y {
            Outcome::NonResponse => pmf::binomial(self.kappa, 0, pi),
            Outcome::Observed(x, k) => pmf::binomial(self.kappa, k, pi) * pmf::binomial(k, x, p),
        }
    }

    fn response_prob(&self, atom: &ParameterAtom) -> f64 {
        1.0 - pmf::binomial(self.kappa, 0, atom[0])
    }

    fn h(&self, y: &Outcome) -> Result<Vec<f64>> {
        match *y {
            Outcome::Observed(x, k) if k >= 1 => Ok(vec![x as f64 / k as f64]),
            other => Err(GmleError::InvalidQuery(alloc::format!("h undefined on {other}"))),
        }
    }

    fn eta(&self, atom: &ParameterAtom) -> Vec<f64> {
        vec![atom[1]]
    }

    fn eta_dim(&self) -> usize {
        1
    }

    fn sample(&self, atom: &ParameterAtom, rng: &mut dyn RngCore) -> Outcome {
        let (pi, p) = (atom[0], atom[1]);
        let k = (0..self.kappa).filter(|_| rng::bernoulli(rng, pi)).count() as u32;
        if k == 0 {
            return Outcome::NonResponse;
        }
        let x = (0..k).filter(|_| rng::bernoulli(rng, p)).count() as u32;
        Outcome::Observed(x, k)
    }
}
