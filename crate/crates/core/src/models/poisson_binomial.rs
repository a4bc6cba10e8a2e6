use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::{check_dim, check_unit, pmf, ObservationModel};
use crate::error::{GmleError, Result};
use crate::grid::ParameterAtom;
use crate::mixture::Outcome;
use crate::rng;

/// Largest Poisson tail mass left beyond the explicit count support.
pub const TAIL_MASS: f64 = 1e-9;

/// Convenience-sample strata: `kappa* ~ Poisson(lambda)` reported units, of
/// which `X ~ Bin(kappa*, p)` are positive. Atom `(lambda, p)` with
/// `0 < lambda <= lambda_max`.
///
/// Counts are explicit up to `cap`, the smallest integer with
/// `P(Poisson(lambda_max) > cap) < 1e-9`. All mass above `cap` is folded
/// into the overflow level `Observed(X, cap + 1)` with
/// `X ~ Bin(cap + 1, p)`, so `h = X / kappa*` keeps `E[h | A] = p` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonBinomialModel {
    lambda_max: f64,
    cap: u32,
}

impl PoissonBinomialModel {
    pub fn new(lambda_max: f64) -> Result<Self> {
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(GmleError::InvalidConfig(format!(
                "lambda_max must be positive, got {lambda_max}"
            )));
        }
        let mut cap = 0u32;
        while pmf::poisson_upper_tail(cap, lambda_max) >= TAIL_MASS {
            cap += 1;
        }
        Ok(Self { lambda_max, cap })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Largest explicit count; `cap + 1` is the overflow level.
    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn overflow_level(&self) -> u32 {
        self.cap + 1
    }

    fn count_prob(&self, k: u32, lambda: f64) -> f64 {
        if k <= self.cap {
            pmf::poisson(k, lambda)
        } else {
            pmf::poisson_upper_tail(self.cap, lambda)
        }
    }
}

impl ObservationModel for PoissonBinomialModel {
    fn name(&self) -> &'static str {
        "poisson-binomial"
    }

    fn support(&self) -> Vec<Outcome> {
        let mut out = vec![Outcome::NonResponse];
        for k in 1..=self.overflow_level() {
            out.extend((0..=k).map(|x| Outcome::Observed(x, k)));
        }
        out
    }

    fn in_support(&self, y: &Outcome) -> bool {
        match *y {
            Outcome::NonResponse => true,
            Outcome::Observed(x, k) => k >= 1 && k <= self.overflow_level() && x <= k,
        }
    }

    fn validate_atom(&self, atom: &ParameterAtom) -> Result<()> {
        check_dim(atom, 2, "(lambda, p)")?;
        let lambda = atom[0];
        if !(lambda > 0.0 && lambda <= self.lambda_max) {
            return Err(GmleError::InvalidAtom(format!(
                "lambda = {lambda} is outside (0, {}]",
                self.lambda_max
            )));
        }
        check_unit("p", atom[1])
    }

    fn full_density(&self, y: &Outcome, atom: &ParameterAtom) -> f64 {
        let (lambda, p) = (atom[0], atom[1]);
        match *y {
            Outcome::NonResponse => pmf::poisson(0, lambda),
            Outcome::Observed(x, k) => self.count_prob(k, lambda) * pmf::binomial(k, x, p),
        }
    }

    fn response_prob(&self, atom: &ParameterAtom) -> f64 {
        -libm::expm1(-atom[0])
    }

    fn h(&self, y: &Outcome) -> Result<Vec<f64>> {
        match *y {
            Outcome::Observed(x, k) if k >= 1 => Ok(vec![x as f64 / k as f64]),
            other => Err(GmleError::InvalidQuery(format!("h undefined on {other}"))),
        }
    }

    fn eta(&self, atom: &ParameterAtom) -> Vec<f64> {
        vec![atom[1]]
    }

    fn eta_dim(&self) -> usize {
        1
    }

    fn sample(&self, atom: &ParameterAtom, rng: &mut dyn RngCore) -> Outcome {
        let (lambda, p) = (atom[0], atom[1]);
        // sequential inversion over the explicit counts
        let u = rng::uniform(rng);
        let mut k = 0u32;
        let mut term = libm::exp(-lambda);
        let mut cum = term;
        while u >= cum && k <= self.cap {
            k += 1;
            term *= lambda / k as f64;
            cum += term;
        }
        if k == 0 {
            return Outcome::NonResponse;
        }
        let k = k.min(self.overflow_level());
        let x = (0..k).filter(|_| rng::bernoulli(rng, p)).count() as u32;
        Outcome::Observed(x, k)
    }
}
