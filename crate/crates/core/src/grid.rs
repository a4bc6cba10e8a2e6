//! Candidate parameter atoms and the finite grids the mixing distribution lives on.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::ops::Index;

use crate::error::{GmleError, Result};

/// One candidate parameter value. Coordinates are model specific, e.g.
/// `(pi, p)` for the strata-binomial model or `(pi, p_1, .., p_S)` for the
/// survey model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterAtom(Vec<f64>);

impl ParameterAtom {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GmleError::InvalidAtom("atom has no coordinates".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(GmleError::InvalidAtom(format!("non-finite coordinate {c}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn bit_key(&self) -> Vec<u64> {
        // -0.0 and 0.0 are the same atom
        self.0.iter().map(|c| (c + 0.0).to_bits()).collect()
    }
}

impl Index<usize> for ParameterAtom {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<f64> for ParameterAtom {
    fn from(x: f64) -> Self {
        Self(alloc::vec![x])
    }
}

/// Ordered, duplicate-free, nonempty list of atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    atoms: Vec<ParameterAtom>,
}

impl ParameterGrid {
    pub fn new(atoms: Vec<ParameterAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(GmleError::InvalidGrid("grid has no atoms".into()));
        }
        let dim = atoms[0].dim();
        let mut seen = BTreeSet::new();
        for (j, atom) in atoms.iter().enumerate() {
            if atom.dim() != dim {
                return Err(GmleError::InvalidGrid(format!(
                    "atom {j} has {} coordinates, expected {dim}",
                    atom.dim()
                )));
            }
            if !seen.insert(atom.bit_key()) {
                return Err(GmleError::InvalidGrid(format!("duplicate atom {:?}", atom.coords())));
            }
        }
        Ok(Self { atoms })
    }

    /// Grid of scalar atoms.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        let atoms = values
            .iter()
            .map(|&v| ParameterAtom::new(alloc::vec![v]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }

    /// Cartesian product of 1-D axes; the last axis varies fastest.
    pub fn cartesian(axes: &[Vec<f64>]) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(GmleError::InvalidGrid("empty axis".into()));
        }
        let mut rows: Vec<Vec<f64>> = alloc::vec![Vec::new()];
        for axis in axes {
            rows = rows
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&x| {
                        let mut r = prefix.clone();
                        r.push(x);
                        r
                    })
                })
                .collect();
        }
        Self::new(rows.into_iter().map(ParameterAtom::new).collect::<Result<_>>()?)
    }

    /// Atoms `(a, s_1, .., s_S)` where `a` runs over `first_axis` and `s` over
    /// the uniform simplex lattice of the given resolution.
    pub fn with_simplex(first_axis: &[f64], simplex_dim: usize, resolution: usize) -> Result<Self> {
        let lattice = simplex_lattice(simplex_dim, resolution)?;
        let mut atoms = Vec::with_capacity(first_axis.len() * lattice.len());
        for &a in first_axis {
            for point in &lattice {
                let mut coords = Vec::with_capacity(simplex_dim + 1);
                coords.push(a);
                coords.extend_from_slice(point);
                atoms.push(ParameterAtom::new(coords)?);
            }
        }
        Self::new(atoms)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[ParameterAtom] {
        &self.atoms
    }

    pub fn iter(&self) -> core::slice::Iter<'_, ParameterAtom> {
        self.atoms.iter()
    }
}

impl Index<usize> for ParameterGrid {
    type Output = ParameterAtom;

    fn index(&self, j: usize) -> &ParameterAtom {
        &self.atoms[j]
    }
}

/// `points` equally spaced values from `lo` to `hi`, both endpoints included.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(GmleError::InvalidGrid(format!(
            "bad axis [{lo}, {hi}] with {points} points"
        )));
    }
    if points == 1 {
        return Ok(alloc::vec![lo]);
    }
    let span = hi - lo;
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + span * (i as f64) / last
            }
        })
        .collect())
}

/// Axis over `[lo, hi]` with the given step; the step must divide the range.
pub fn axis_with_step(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(GmleError::InvalidGrid(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let intervals = (hi - lo) / step;
    let rounded = libm::round(intervals);
    if libm::fabs(intervals - rounded) > 1e-9 * rounded.max(1.0) {
        return Err(GmleError::InvalidGrid(format!(
            "step {step} does not divide [{lo}, {hi}] evenly"
        )));
    }
    linspace(lo, hi, rounded as usize + 1)
}

/// All points of the probability simplex in `dim` coordinates whose entries
/// are multiples of `1/resolution`.
pub fn simplex_lattice(dim: usize, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || resolution == 0 {
        return Err(GmleError::InvalidGrid(
            "simplex lattice needs dim >= 1 and resolution >= 1".into(),
        ));
    }
    let mut out = Vec::new();
    let mut parts = alloc::vec![0usize; dim];
    compositions(resolution, 0, &mut parts, &mut out, resolution);
    Ok(out)
}

fn compositions(left: usize, pos: usize, parts: &mut [usize], out: &mut Vec<Vec<f64>>, total: usize) {
    if pos + 1 == parts.len() {
        parts[pos] = left;
        out.push(parts.iter().map(|&k| k as f64 / total as f64).collect());
        return;
    }
    for k in 0..=left {
        parts[pos] = k;
        compositions(left - k, pos + 1, parts, out, total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(ParameterGrid::new(vec![]).is_err());
        assert!(ParameterGrid::from_scalars(&[0.1, 0.2, 0.1]).is_err());
        assert!(ParameterGrid::from_scalars(&[0.0, -0.0]).is_err());
    }

    #[test]
    fn cartesian_order_is_row_major() {
        let g = ParameterGrid::cartesian(&[vec![0.0, 1.0], vec![0.1, 0.2, 0.3]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0].coords(), &[0.0, 0.1]);
        assert_eq!(g[1].coords(), &[0.0, 0.2]);
        assert_eq!(g[3].coords(), &[1.0, 0.1]);
    }

    #[test]
    fn default_axis_hits_table_atoms() {
        let axis = axis_with_step(0.0, 1.0, 0.025).unwrap();
        assert_eq!(axis.len(), 41);
        for target in [0.2, 0.3, 0.4, 0.6, 0.7, 0.8] {
            assert!(axis.iter().any(|&x| (x - target).abs() < 1e-12), "{target} missing");
        }
        assert_eq!(*axis.last().unwrap(), 1.0);
        assert!(axis_with_step(0.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn simplex_lattice_counts_and_sums() {
        // C(r + d - 1, d - 1) points
        let pts = simplex_lattice(3, 4).unwrap();
        assert_eq!(pts.len(), 15);
        for p in &pts {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let g = ParameterGrid::with_simplex(&[0.5, 1.0], 2, 10).unwrap();
        assert_eq!(g.len(), 22);
        assert_eq!(g[0].dim(), 3);
    }
}
