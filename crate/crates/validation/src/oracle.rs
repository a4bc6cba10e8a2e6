//! Exhaustive search over the weight simplex of a three-atom grid.
//!
//! The search never touches the EM code: it evaluates the log-likelihood
//! `sum_i c_i ln(sum_j w_j L_ij)` on a lattice of step 0.001, then on two
//! finer lattices (steps 1e-5 and 1e-7) centred on the best point so far.

/// Densities of each distinct outcome under the three atoms, with counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeAtomProblem {
    pub rows: Vec<[f64; 3]>,
    pub counts: Vec<u64>,
}

/// Best weights found and their log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptimum {
    pub loglik: f64,
    pub weights: [f64; 3],
}

impl ThreeAtomProblem {
    pub fn loglik(&self, w: [f64; 3]) -> f64 {
        let mut total = 0.0;
        for (row, c) in self.rows.iter().zip(&self.counts) {
            let f = row[0] * w[0] + row[1] * w[1] + row[2] * w[2];
            if f <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += *c as f64 * f.ln();
        }
        total
    }

    pub fn brute_force(&self) -> OracleOptimum {
        const COARSE: u32 = 1000;
        let mut best = OracleOptimum {
            loglik: f64::NEG_INFINITY,
            weights: [0.0; 3],
        };
        let consider = |a: f64, b: f64, best: &mut OracleOptimum| {
            if a < 0.0 || b < 0.0 || a + b > 1.0 {
                return;
            }
            let w = [a, b, (1.0 - a - b).max(0.0)];
            let v = self.loglik(w);
            if v > best.loglik {
                *best = OracleOptimum { loglik: v, weights: w };
            }
        };
        for i in 0..=COARSE {
            for j in 0..=(COARSE - i) {
                consider(
                    f64::from(i) / f64::from(COARSE),
                    f64::from(j) / f64::from(COARSE),
                    &mut best,
                );
            }
        }
        let mut step = 1.0 / f64::from(COARSE);
        for _ in 0..2 {
            let fine = step / 100.0;
            let [a0, b0, _] = best.weights;
            for di in -100i32..=100 {
                for dj in -100i32..=100 {
                    consider(a0 + f64::from(di) * fine, b0 + f64::from(dj) * fine, &mut best);
                }
            }
            step = fine;
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_optimum() {
        // rows of a 3x3 identity with counts 1, 2, 3: optimum w = (1/6, 2/6, 3/6)
        let p = ThreeAtomProblem {
            rows: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            counts: vec![1, 2, 3],
        };
        let opt = p.brute_force();
        let exact = (1.0f64 / 6.0).ln() + 2.0 * (2.0f64 / 6.0).ln() + 3.0 * (3.0f64 / 6.0).ln();
        assert!((opt.loglik - exact).abs() < 1e-10);
        assert!((opt.weights[0] - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn finds_vertex_optimum() {
        let p = ThreeAtomProblem {
            rows: vec![[0.9, 0.5, 0.1]],
            counts: vec![4],
        };
        let opt = p.brute_force();
        assert_eq!(opt.weights, [1.0, 0.0, 0.0]);
        assert!((opt.loglik - 4.0 * 0.9f64.ln()).abs() < 1e-15);
    }
}
