use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::{check_dim, check_unit, ObservationModel};
use crate::error::{GmleError, Result};
use crate::grid::ParameterAtom;
use crate::mixture::Outcome;
use crate::rng;

/// `Y ~ Bernoulli(p)` with atom `(p)`. Outcomes are `Observed(y, 1)`; every
/// outcome is a response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BernoulliModel;

impl ObservationModel for BernoulliModel {
    fn name(&self) -> &'static str {
        "bernoulli"
    }

    fn support(&self) -> Vec<Outcome> {
        vec![Outcome::Observed(0, 1), Outcome::Observed(1, 1)]
    }

    fn in_support(&self, y: &Outcome) -> bool {
        matches!(y, Outcome::Observed(0 | 1, 1))
    }

    fn validate_atom(&self, atom: &ParameterAtom) -> Result<()> {
        check_dim(atom, 1, "(p)")?;
        check_unit("p", atom[0])
    }

    fn full_density(&self, y: &Outcome, atom: &ParameterAtom) -> f64 {
        match y {
            Outcome::Observed(1, _) => atom[0],
            Outcome::Observed(0, _) => 1.0 - atom[0],
            _ => 0.0,
        }
    }

    fn response_prob(&self, _atom: &ParameterAtom) -> f64 {
        1.0
    }

    fn h(&self, y: &Outcome) -> Result<Vec<f64>> {
        match y {
            Outcome::Observed(v, 1) if *v <= 1 => Ok(vec![*v as f64]),
            other => Err(GmleError::InvalidQuery(alloc::format!("h undefined on {other}"))),
        }
    }

    fn eta(&self, atom: &ParameterAtom) -> Vec<f64> {
        vec![atom[0]]
    }

    fn eta_dim(&self) -> usize {
        1
    }

    fn sample(&self, atom: &ParameterAtom, rng: &mut dyn RngCore) -> Outcome {
        Outcome::Observed(rng::bernoulli(rng, atom[0]) as u32, 1)
    }
}
