use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::{check_dim, check_unit, ObservationModel};
use crate::error::{GmleError, Result};
use crate::grid::ParameterAtom;
use crate::mixture::Outcome;
use crate::rng;

/// Survey item contacted up to `attempts` times. The attempt of first
/// response is geometric with success probability `pi`, truncated at
/// `attempts`; the answer falls in category `s` with probability `p^s`,
/// independently of the attempt count.
///
/// Atom `(pi, p^1, .., p^S)`; outcome `Observed(s, k)` with 1-based category
/// `s` and attempt `k`, or `NonResponse` after `attempts` failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurveyGeometricModel {
    attempts: u32,
    categories: u32,
}

const SIMPLEX_TOL: f64 = 1e-12;

impl SurveyGeometricModel {
    pub fn new(attempts: u32, categories: u32) -> Result<Self> {
        if attempts == 0 || categories == 0 {
            return Err(GmleError::InvalidConfig(
                "attempts and categories must be positive".into(),
            ));
        }
        Ok(Self { attempts, categories })
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn categories(&self) -> u32 {
        self.categories
    }
}

impl ObservationModel for SurveyGeometricModel {
    fn name(&self) -> &'static str {
        "survey-geometric"
    }

    fn support(&self) -> Vec<Outcome> {
        let mut out = Vec::with_capacity((self.attempts * self.categories + 1) as usize);
        for s in 1..=self.categories {
            out.extend((1..=self.attempts).map(|k| Outcome::Observed(s, k)));
        }
        out.push(Outcome::NonResponse);
        out
    }

    fn in_support(&self, y: &Outcome) -> bool {
        match *y {
            Outcome::NonResponse => true,
            Outcome::Observed(s, k) => (1..=self.categories).contains(&s) && (1..=self.attempts).contains(&k),
        }
    }

    fn validate_atom(&self, atom: &ParameterAtom) -> Result<()> {
        check_dim(atom, self.categories as usize + 1, "(pi, p^1, .., p^S)")?;
        check_unit("pi", atom[0])?;
        for (s, p) in atom.coords()[1..].iter().enumerate() {
            check_unit(&format!("p^{}", s + 1), *p)?;
        }
        let total: f64 = atom.coords()[1..].iter().sum();
        if libm::fabs(total - 1.0) > SIMPLEX_TOL {
            return Err(GmleError::InvalidAtom(format!("category probabilities sum to {total}")));
        }
        Ok(())
    }

    fn full_density(&self, y: &Outcome, atom: &ParameterAtom) -> f64 {
        let pi = atom[0];
        match *y {
            Outcome::NonResponse => libm::pow(1.0 - pi, self.attempts as f64),
            Outcome::Observed(s, k) => libm::pow(1.0 - pi, (k - 1) as f64) * pi * atom[s as usize],
        }
    }

    fn response_prob(&self, atom: &ParameterAtom) -> f64 {
        1.0 - libm::pow(1.0 - atom[0], self.attempts as f64)
    }

    fn h(&self, y: &Outcome) -> Result<Vec<f64>> {
        match *y {
            Outcome::Observed(s, _) if (1..=self.categories).contains(&s) => {
                let mut e = vec![0.0; self.categories as usize];
                e[s as usize - 1] = 1.0;
                Ok(e)
            }
            other => Err(GmleError::InvalidQuery(format!("h undefined on {other}"))),
        }
    }

    fn eta(&self, atom: &ParameterAtom) -> Vec<f64> {
        atom.coords()[1..].to_vec()
    }

    fn eta_dim(&self) -> usize {
        self.categories as usize
    }

    fn sample(&self, atom: &ParameterAtom, rng: &mut dyn RngCore) -> Outcome {
        let Some(k) = (1..=self.attempts).find(|_| rng::bernoulli(rng, atom[0])) else {
            return Outcome::NonResponse;
        };
        let u = rng::uniform(rng);
        let mut cum = 0.0;
        for s in 1..=self.categories {
            cum += atom[s as usize];
            if u < cum {
                return Outcome::Observed(s, k);
            }
        }
        // rounding left u above the last partial sum
        let last = (1..=self.categories)
            .rev()
            .find(|&s| atom[s as usize] > 0.0)
            .unwrap_or(self.categories);
        Outcome::Observed(last, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::CensoringMode;

    #[test]
    fn density_example() {
        let m = SurveyGeometricModel::new(2, 2).unwrap();
        let a = ParameterAtom::new(vec![0.5, 0.3, 0.7]).unwrap();
        let d = m.density(&Outcome::Observed(1, 2), &a, CensoringMode::Full).unwrap();
        assert!((d - 0.075).abs() < 1e-15);
        assert_eq!(m.support().len(), 5);
    }

    #[test]
    fn indicator_h_and_eta() {
        let m = SurveyGeometricModel::new(3, 2).unwrap();
        assert_eq!(m.h(&Outcome::Observed(2, 3)).unwrap(), vec![0.0, 1.0]);
        assert!(m.h(&Outcome::NonResponse).is_err());
        let a = ParameterAtom::new(vec![0.5, 0.3, 0.7]).unwrap();
        assert_eq!(m.eta(&a), vec![0.3, 0.7]);
    }

    #[test]
    fn rejects_off_simplex() {
        let m = SurveyGeometricModel::new(3, 2).unwrap();
        assert!(m
            .validate_atom(&ParameterAtom::new(vec![0.5, 0.3, 0.6]).unwrap())
            .is_err());
        assert!(m.validate_atom(&ParameterAtom::new(vec![0.5, 0.3]).unwrap()).is_err());
    }

    #[test]
    fn never_responding_atom() {
        let m = SurveyGeometricModel::new(3, 2).unwrap();
        let a = ParameterAtom::new(vec![0.0, 0.5, 0.5]).unwrap();
        let mut r = rng::stream(9);
        assert!((0..50).all(|_| m.sample(&a, &mut r) == Outcome::NonResponse));
    }
}
