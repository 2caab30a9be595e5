use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::MagneticSystem;
use crate::lagrangian::LagrangianSystem;
use crate::linalg::{inertia, row_sum_norm, symmetric_eigenvalues};
use crate::loopspace::{hessian, DiscreteLoop};

/// Largest matrix size handled by a dense eigendecomposition; beyond it the
/// index comes from `LDLᵀ` inertia of shifted matrices.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseData {
    pub index: usize,
    pub nullity: usize,
    /// Absolute threshold separating null from nonzero eigenvalues.
    pub threshold: f64,
    /// The lowest eigenvalues (dense path only).
    pub lowest: Vec<f64>,
}

/// Morse index and nullity of the discrete second variation at `q`.
pub fn morse_index(l: &LagrangianSystem, s: &MagneticSystem, q: &DiscreteLoop, tol_null: f64) -> Result<MorseData> {
    Ok(morse_from_hessian(&hessian(l, s, q)?, tol_null))
}

pub(crate) fn morse_from_hessian(h: &DMatrix<f64>, tol_null: f64) -> MorseData {
    if h.nrows() <= DENSE_LIMIT {
        let ev = symmetric_eigenvalues(h);
        let scale = ev.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let threshold = tol_null * scale.max(1.0);
        MorseData {
            index: ev.iter().filter(|x| **x < -threshold).count(),
            nullity: ev.iter().filter(|x| x.abs() <= threshold).count(),
            threshold,
            lowest: ev.iter().take(8).copied().collect(),
        }
    } else {
        let threshold = tol_null * row_sum_norm(h).max(1.0);
        let shifted = |c: f64| {
            let mut m = h.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += c;
            }
            inertia(&m, 0.0).negative
        };
        let below_minus = shifted(threshold);
        let below_plus = shifted(-threshold);
        MorseData { index: below_minus, nullity: below_plus - below_minus, threshold, lowest: Vec::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MagneticForm, TorusManifold};

    fn constant_loop_index(delta: f64, n: usize) -> MorseData {
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::area(1.0), delta);
        let q = DiscreteLoop::constant(&[0.1, 0.2], 1.0, n).unwrap();
        morse_index(&l, &s, &q, 1e-6).unwrap()
    }

    #[test]
    fn constant_loop_index_jumps_past_two_pi() {
        for n in [64, 128] {
            let below = constant_loop_index(6.2, n);
            let above = constant_loop_index(6.4, n);
            assert_eq!((below.index, below.nullity), (0, 2));
            assert_eq!((above.index, above.nullity), (2, 2));
        }
    }

    #[test]
    fn discrete_spectrum_oracle() {
        // eigenvalues d(d ± δ cos(πk/N)), d = 2 sin(πk/N)/h
        let (delta, n) = (3.0, 16usize);
        let h = 1.0 / n as f64;
        let mut expect: Vec<f64> = (0..n)
            .flat_map(|k| {
                let a = std::f64::consts::PI * k as f64 / n as f64;
                let d = 2.0 * a.sin() / h;
                [d * (d - delta * a.cos()), d * (d + delta * a.cos())]
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::area(1.0), delta);
        let q = DiscreteLoop::constant(&[0.0, 0.0], 1.0, n).unwrap();
        let ev = symmetric_eigenvalues(&hessian(&l, &s, &q).unwrap());
        for (a, b) in ev.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn inertia_path_agrees_with_dense() {
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::area(1.0), 13.0);
        let q = DiscreteLoop::constant(&[0.0, 0.0], 1.0, 32).unwrap();
        let h = hessian(&l, &s, &q).unwrap();
        let dense = morse_from_hessian(&h, 1e-6);
        let threshold = 1e-6 * row_sum_norm(&h);
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += threshold;
        }
        assert_eq!(inertia(&m, 0.0).negative, dense.index);
        assert_eq!(dense.index, 4);
    }
}
