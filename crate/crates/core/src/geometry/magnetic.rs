use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth of the chosen primitive of `σ̃` on the universal cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthClass {
    /// A bounded primitive exists.
    Bounded,
    /// The primitive grows at most linearly.
    Linear,
    /// No primitive is available.
    None,
}

/// The 2-form `(b + a cos 2πq_i) dq_i ∧ dq_j` (indices 0-based, `i ≠ j`).
///
/// Its primitive on `ℝⁿ` is `θ = (b q_i + a sin(2πq_i)/2π) dq_j`: linear in
/// the constant part and periodic in the modulated part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarTerm {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
    #[serde(default)]
    pub modulation: f64,
}

impl PlanarTerm {
    fn coefficient(&self, q: &[f64]) -> f64 {
        self.strength + self.modulation * (TAU * q[self.i]).cos()
    }

    fn coefficient_derivative(&self, q: &[f64]) -> f64 {
        -self.modulation * TAU * (TAU * q[self.i]).sin()
    }
}

/// A closed 2-form on `𝕋ⁿ` given as a sum of planar terms, together with
/// its primitive on the universal cover.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticForm {
    dim: usize,
    terms: Vec<PlanarTerm>,
    primitive_available: bool,
}

impl MagneticForm {
    pub fn new(dim: usize, terms: Vec<PlanarTerm>) -> Result<Self> {
        for t in &terms {
            if t.i >= dim || t.j >= dim || t.i == t.j {
                return Err(Error::InvalidParameter(format!(
                    "planar term indices ({}, {}) invalid in dimension {dim}",
                    t.i, t.j
                )));
            }
            if !t.strength.is_finite() || !t.modulation.is_finite() {
                return Err(Error::InvalidParameter("non-finite form coefficient".into()));
            }
        }
        Ok(Self { dim, terms, primitive_available: true })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), primitive_available: true }
    }

    /// `b · dq_i ∧ dq_j` with 0-based indices.
    pub fn planar(dim: usize, i: usize, j: usize, b: f64) -> Result<Self> {
        Self::new(dim, vec![PlanarTerm { i, j, strength: b, modulation: 0.0 }])
    }

    /// The area form `b · dq₁ ∧ dq₂` on `𝕋²`.
    pub fn area(b: f64) -> Self {
        Self::planar(2, 0, 1, b).expect("valid indices")
    }

    /// Marks the primitive as unavailable (growth class `none`).
    pub fn without_primitive(mut self) -> Self {
        self.primitive_available = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[PlanarTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.strength == 0.0 && t.modulation == 0.0)
    }

    /// True when `Σ(q)` does not depend on `q`.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.modulation == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| PlanarTerm { strength: c * t.strength, modulation: c * t.modulation, ..t.clone() })
            .collect();
        Self { terms, ..self.clone() }
    }

    pub fn growth_class(&self) -> GrowthClass {
        if !self.primitive_available {
            GrowthClass::None
        } else if self.terms.iter().all(|t| t.strength == 0.0) {
            GrowthClass::Bounded
        } else {
            GrowthClass::Linear
        }
    }

    pub fn has_primitive(&self) -> bool {
        self.primitive_available
    }

    /// Antisymmetric coefficient matrix with `σ_q(u, v) = uᵀ Σ(q) v`.
    pub fn sigma_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let c = t.coefficient(q);
            s[(t.i, t.j)] += c;
            s[(t.j, t.i)] -= c;
        }
        s
    }

    /// `∂Σ/∂q_k` for all `k`.
    pub fn sigma_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>> {
        let mut d = vec![DMatrix::zeros(self.dim, self.dim); self.dim];
        for t in &self.terms {
            let c = t.coefficient_derivative(q);
            d[t.i][(t.i, t.j)] += c;
            d[t.i][(t.j, t.i)] -= c;
        }
        d
    }

    /// Grid average `Σ̄` (the cohomology class of `σ`).
    pub fn mean_sigma(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            s[(t.i, t.j)] += t.strength;
            s[(t.j, t.i)] -= t.strength;
        }
        s
    }

    /// Primitive `θ` at a cover point, as a covector.
    pub fn primitive(&self, q: &[f64]) -> DVector<f64> {
        let mut th = DVector::zeros(self.dim);
        for t in &self.terms {
            let x = q[t.i];
            th[t.j] += t.strength * x + t.modulation * (TAU * x).sin() / TAU;
        }
        th
    }

    /// Jacobian `J[(a, k)] = ∂θ_a/∂q_k`.
    pub fn primitive_jacobian(&self, q: &[f64]) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            j[(t.j, t.i)] += t.coefficient(q);
        }
        j
    }

    /// `Σ_a w_a ∂²θ_a/∂q_k∂q_l`.
    pub fn primitive_hessian_contracted(&self, q: &[f64], w: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            h[(t.i, t.i)] += w[t.j] * t.coefficient_derivative(q);
        }
        h
    }

    /// The constant covector `θ(q + m) − θ(q)` for a lattice vector `m`.
    pub fn lattice_shift(&self, m: &[i64]) -> DVector<f64> {
        let mut c = DVector::zeros(self.dim);
        for t in &self.terms {
            c[t.j] += t.strength * m[t.i] as f64;
        }
        c
    }
}

/// A magnetic form together with the field-strength multiplier `δ`; the
/// dynamics is generated by `δσ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticSystem {
    pub form: MagneticForm,
    pub delta: f64,
}

impl MagneticSystem {
    pub fn new(form: MagneticForm, delta: f64) -> Self {
        Self { form, delta }
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    /// `δ Σ(q)`.
    pub fn effective_sigma(&self, q: &[f64]) -> DMatrix<f64> {
        self.form.sigma_matrix(q) * self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modulated() -> MagneticForm {
        MagneticForm::new(
            3,
            vec![
                PlanarTerm { i: 0, j: 1, strength: 1.0, modulation: 0.4 },
                PlanarTerm { i: 2, j: 0, strength: -0.5, modulation: 0.2 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn antisymmetric_everywhere() {
        let f = modulated();
        for q in [[0.1, 0.2, 0.3], [0.7, -1.2, 4.4]] {
            let s = f.sigma_matrix(&q);
            assert!((&s + s.transpose()).amax() < 1e-15);
        }
    }

    #[test]
    fn closed_in_three_dimensions() {
        let f = modulated();
        let q = [0.31, 0.47, 0.83];
        let eps = 1e-5;
        let d = |k: usize| {
            let mut a = q;
            let mut b = q;
            a[k] += eps;
            b[k] -= eps;
            (f.sigma_matrix(&a) - f.sigma_matrix(&b)) / (2.0 * eps)
        };
        let cyclic = d(0)[(1, 2)] + d(1)[(2, 0)] + d(2)[(0, 1)];
        assert!(cyclic.abs() < 1e-8);
    }

    #[test]
    fn primitive_exterior_derivative_is_sigma() {
        let f = modulated();
        let q = [1.31, -0.47, 2.83];
        let eps = 1e-5;
        let mut dth = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let mut a = q;
            let mut b = q;
            a[k] += eps;
            b[k] -= eps;
            let col = (f.primitive(&a) - f.primitive(&b)) / (2.0 * eps);
            for i in 0..3 {
                dth[(i, k)] = col[i];
            }
        }
        // Σ_kl = ∂_k θ_l − ∂_l θ_k
        let s = f.sigma_matrix(&q);
        for k in 0..3 {
            for l in 0..3 {
                assert!((dth[(l, k)] - dth[(k, l)] - s[(k, l)]).abs() < 1e-8);
            }
        }
        assert!((f.primitive_jacobian(&q) - dth).amax() < 1e-8);
    }

    #[test]
    fn lattice_shift_is_constant() {
        let f = modulated();
        let m = [2i64, -1, 3];
        let q = [0.2, 0.9, -0.4];
        let shifted: Vec<f64> = q.iter().zip(&m).map(|(x, k)| x + *k as f64).collect();
        let diff = f.primitive(&shifted) - f.primitive(&q);
        assert!((diff - f.lattice_shift(&m)).amax() < 1e-12);
    }

    #[test]
    fn growth_classes() {
        assert_eq!(MagneticForm::area(1.0).growth_class(), GrowthClass::Linear);
        let exact = MagneticForm::new(2, vec![PlanarTerm { i: 0, j: 1, strength: 0.0, modulation: 1.0 }]).unwrap();
        assert_eq!(exact.growth_class(), GrowthClass::Bounded);
        assert_eq!(MagneticForm::zero(2).growth_class(), GrowthClass::Bounded);
        assert_eq!(MagneticForm::area(1.0).without_primitive().growth_class(), GrowthClass::None);
        assert!(MagneticForm::planar(2, 0, 0, 1.0).is_err());
    }
}
