//! Fiberwise convex Lagrangians `L(t, q, v)` on `𝕋ⁿ` with all first and
//! second coordinate derivatives.

use nalgebra::{DMatrix, DVector};

use crate::fourier::FourierSeries;
use crate::geometry::TorusManifold;

/// Potential energy `V(t, q)`.
pub type Potential = FourierSeries;

/// Value and derivatives of a Lagrangian at one point of `ℝ × T𝕋ⁿ`.
///
/// `dqv[(k, l)] = ∂²L/∂q_k∂v_l`.
#[derive(Clone, Debug)]
pub struct LagrangianJet {
    pub value: f64,
    pub dq: DVector<f64>,
    pub dv: DVector<f64>,
    pub dvv: DMatrix<f64>,
    pub dqv: DMatrix<f64>,
    pub dqq: DMatrix<f64>,
}

pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, t: f64, q: &[f64], v: &[f64]) -> LagrangianJet;
    fn value(&self, t: f64, q: &[f64], v: &[f64]) -> f64 {
        self.jet(t, q, v).value
    }
}

/// Built-in Lagrangians.
#[derive(Clone, Debug)]
pub enum LagrangianSystem {
    /// `L = ½|v|²_g − V(t, q)`.
    Kinetic { manifold: TorusManifold, potential: Potential },
    /// `L = ½|v|²_g + c(√(1 + |v|²_g) − 1) − V(t, q)`, strictly convex but not quadratic.
    Softened { manifold: TorusManifold, potential: Potential, softening: f64 },
}

impl LagrangianSystem {
    pub fn kinetic(manifold: TorusManifold, potential: Potential) -> Self {
        Self::Kinetic { manifold, potential }
    }

    pub fn free(manifold: TorusManifold) -> Self {
        Self::Kinetic { manifold, potential: Potential::zero() }
    }

    pub fn manifold(&self) -> &TorusManifold {
        match self {
            Self::Kinetic { manifold, .. } | Self::Softened { manifold, .. } => manifold,
        }
    }

    pub fn potential(&self) -> &Potential {
        match self {
            Self::Kinetic { potential, .. } | Self::Softened { potential, .. } => potential,
        }
    }

    /// True for Lagrangians invariant under all translations of the cover.
    pub fn translation_invariant(&self) -> bool {
        self.manifold().is_flat() && self.potential().is_spatially_constant()
    }

    pub fn is_autonomous(&self) -> bool {
        self.potential().terms.iter().all(|t| t.omega == 0.0 || t.amplitude == 0.0)
    }
}

impl Lagrangian for LagrangianSystem {
    fn dim(&self) -> usize {
        self.manifold().dim()
    }

    fn jet(&self, t: f64, q: &[f64], v: &[f64]) -> LagrangianJet {
        let m = self.manifold();
        let n = m.dim();
        let vv = DVector::from_column_slice(v);
        let g = m.gram(q);
        let dg = m.gram_derivatives(q);
        let ddg = m.gram_second_derivatives(q);
        let pot = self.potential();

        let gv = &g * &vv;
        let s = vv.dot(&gv);
        let dgv: Vec<DVector<f64>> = dg.iter().map(|d| d * &vv).collect();
        let ds_dq = DVector::from_iterator(n, dgv.iter().map(|x| x.dot(&vv)));

        let mut jet = LagrangianJet {
            value: 0.5 * s - pot.value(t, q),
            dq: &ds_dq * 0.5 - pot.gradient(t, q),
            dv: gv.clone(),
            dvv: g.clone(),
            dqv: DMatrix::from_fn(n, n, |k, l| dgv[k][l]),
            dqq: DMatrix::from_fn(n, n, |k, l| 0.5 * vv.dot(&(&ddg[k][l] * &vv))) - pot.hessian(t, q),
        };

        if let Self::Softened { softening: c, .. } = self {
            let r = (1.0 + s).sqrt();
            let d1 = c / (2.0 * r);
            let d2 = -c / (4.0 * r * r * r);
            let ds_dv = &gv * 2.0;
            jet.value += c * (r - 1.0);
            jet.dq += &ds_dq * d1;
            jet.dv += &ds_dv * d1;
            jet.dvv += &g * (2.0 * d1) + &ds_dv * ds_dv.transpose() * d2;
            jet.dqv += DMatrix::from_fn(n, n, |k, l| 2.0 * d1 * dgv[k][l] + d2 * ds_dq[k] * ds_dv[l]);
            jet.dqq += DMatrix::from_fn(n, n, |k, l| {
                d1 * vv.dot(&(&ddg[k][l] * &vv)) + d2 * ds_dq[k] * ds_dq[l]
            });
        }
        jet
    }
}
