//! Periodic scalar fields built from finitely many cosine modes.
//!
//! Both potentials `V(t, q)` and conformal factors `f(q)` are represented as
//! `Σ a cos(2π k·q + ω t + φ)` with integer wavevectors `k`, which makes them
//! exactly `ℤⁿ`-periodic and gives closed-form derivatives.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One mode `a cos(2π k·q + ω t + φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub wavevector: Vec<i64>,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl CosineTerm {
    fn angle(&self, t: f64, q: &[f64]) -> f64 {
        let kq: f64 = self
            .wavevector
            .iter()
            .zip(q)
            .map(|(&k, &x)| k as f64 * x)
            .sum();
        TAU * kq + self.omega * t + self.phase
    }

    fn is_constant(&self) -> bool {
        self.omega == 0.0 && self.wavevector.iter().all(|&k| k == 0)
    }
}

/// A finite sum of cosine modes on `ℝ × 𝕋ⁿ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FourierSeries {
    pub terms: Vec<CosineTerm>,
}

impl FourierSeries {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            terms: vec![CosineTerm {
                amplitude: c,
                wavevector: vec![0; dim],
                omega: 0.0,
                phase: 0.0,
            }],
        }
    }

    /// Single spatial mode `a cos(2π k·q)`.
    pub fn mode(amplitude: f64, wavevector: Vec<i64>) -> Self {
        Self {
            terms: vec![CosineTerm {
                amplitude,
                wavevector,
                omega: 0.0,
                phase: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0)
    }

    /// True when the field has no spatial dependence.
    pub fn is_spatially_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.amplitude == 0.0 || t.wavevector.iter().all(|&k| k == 0))
    }

    pub fn value(&self, t: f64, q: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.amplitude * m.angle(t, q).cos())
            .sum()
    }

    pub fn gradient(&self, t: f64, q: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(q.len());
        for m in &self.terms {
            let s = -m.amplitude * m.angle(t, q).sin() * TAU;
            for (gi, &k) in g.iter_mut().zip(&m.wavevector) {
                *gi += s * k as f64;
            }
        }
        g
    }

    pub fn hessian(&self, t: f64, q: &[f64]) -> DMatrix<f64> {
        let n = q.len();
        let mut h = DMatrix::zeros(n, n);
        for m in &self.terms {
            let c = -m.amplitude * m.angle(t, q).cos() * TAU * TAU;
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += c * (m.wavevector[i] * m.wavevector[j]) as f64;
                }
            }
        }
        h
    }

    /// Certified upper bound of the field over `ℝ × 𝕋ⁿ`.
    pub fn sup_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                if m.is_constant() {
                    m.amplitude * m.phase.cos()
                } else {
                    m.amplitude.abs()
                }
            })
            .sum()
    }

    /// Certified lower bound of the field over `ℝ × 𝕋ⁿ`.
    pub fn inf_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                if m.is_constant() {
                    m.amplitude * m.phase.cos()
                } else {
                    -m.amplitude.abs()
                }
            })
            .sum()
    }

    /// Upper bound of the Euclidean norm of the spatial gradient.
    pub fn gradient_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                let k2: f64 = m.wavevector.iter().map(|&k| (k * k) as f64).sum();
                m.amplitude.abs() * TAU * k2.sqrt()
            })
            .sum()
    }

    /// Upper bound of the spectral norm of the spatial Hessian.
    pub fn hessian_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|m| {
                let k2: f64 = m.wavevector.iter().map(|&k| (k * k) as f64).sum();
                m.amplitude.abs() * TAU * TAU * k2
            })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.terms
            .iter()
            .all(|m| m.amplitude.is_finite() && m.omega.is_finite() && m.phase.is_finite())
    }

    pub fn check_dim(&self, dim: usize) -> bool {
        self.terms.iter().all(|m| m.wavevector.len() == dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FourierSeries {
        FourierSeries {
            terms: vec![
                CosineTerm { amplitude: 0.3, wavevector: vec![1, -2], omega: 0.7, phase: 0.1 },
                CosineTerm { amplitude: -0.2, wavevector: vec![0, 1], omega: 0.0, phase: 0.0 },
            ],
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = sample();
        let q = [0.31, -0.77];
        let t = 0.4;
        let g = f.gradient(t, &q);
        let h = f.hessian(t, &q);
        let eps = 1e-6;
        for i in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += eps;
            qm[i] -= eps;
            let fd = (f.value(t, &qp) - f.value(t, &qm)) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-7);
            let gd = (f.gradient(t, &qp) - f.gradient(t, &qm)) / (2.0 * eps);
            for j in 0..2 {
                assert!((gd[j] - h[(j, i)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn periodic_in_q() {
        let f = sample();
        let a = f.value(0.2, &[0.1, 0.4]);
        let b = f.value(0.2, &[3.1, -1.6]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn bounds_enclose_values() {
        let f = sample();
        assert!(f.sup_bound() >= 0.5 - 1e-15);
        let c = FourierSeries::constant(2, 1.5);
        assert_eq!(c.sup_bound(), 1.5);
        assert_eq!(c.inf_bound(), 1.5);
    }
}
