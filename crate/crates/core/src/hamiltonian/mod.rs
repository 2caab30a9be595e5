//! Hamiltonians on `T*𝕋ⁿ`, Fenchel duality with fiberwise convex
//! Lagrangians, and the magnetic Hamiltonian flow.

mod crosscheck;
mod flow;

pub use crosscheck::{crosscheck_orbit, node_deviation, CrosscheckOptions, CrosscheckReport};
pub use flow::{
    flow_jacobian, integrate, magnetic_vector_field, monodromy, symplectic_form_matrix, trajectory_csv, Monodromy,
    Trajectory,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{SampleGrid, TorusManifold};
use crate::lagrangian::{Lagrangian, LagrangianJet, LagrangianSystem, Potential};
use crate::linalg::{dvec, symmetric_eigenvalues};

/// Value and derivatives of a Hamiltonian; `dqp[(k, l)] = ∂²H/∂q_k∂p_l`.
#[derive(Clone, Debug)]
pub struct HamiltonianJet {
    pub value: f64,
    pub dq: DVector<f64>,
    pub dp: DVector<f64>,
    pub dpp: DMatrix<f64>,
    pub dqp: DMatrix<f64>,
    pub dqq: DMatrix<f64>,
}

pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, t: f64, q: &[f64], p: &[f64]) -> Result<HamiltonianJet>;
    fn value(&self, t: f64, q: &[f64], p: &[f64]) -> Result<f64> {
        Ok(self.jet(t, q, p)?.value)
    }
}

/// Built-in Hamiltonians.
#[derive(Clone, Debug)]
pub enum HamiltonianSystem {
    /// `H = ½|p|²_{g*} + V(t, q)`.
    Kinetic { manifold: TorusManifold, potential: Potential },
    /// Fenchel dual of a Lagrangian, evaluated by a fiberwise Newton solve.
    FenchelOf(LagrangianSystem),
}

impl HamiltonianSystem {
    pub fn kinetic(manifold: TorusManifold, potential: Potential) -> Self {
        Self::Kinetic { manifold, potential }
    }

    pub fn manifold(&self) -> &TorusManifold {
        match self {
            Self::Kinetic { manifold, .. } => manifold,
            Self::FenchelOf(l) => l.manifold(),
        }
    }

    /// Velocity `∂H/∂p` at a phase point.
    pub fn velocity(&self, t: f64, q: &[f64], p: &[f64]) -> Result<DVector<f64>> {
        match self {
            Self::Kinetic { manifold, .. } => Ok(manifold.gram_inverse(q)? * dvec(p)),
            Self::FenchelOf(l) => legendre_velocity(l, t, q, p),
        }
    }
}

impl Hamiltonian for HamiltonianSystem {
    fn dim(&self) -> usize {
        self.manifold().dim()
    }

    fn jet(&self, t: f64, q: &[f64], p: &[f64]) -> Result<HamiltonianJet> {
        match self {
            Self::Kinetic { manifold, potential } => kinetic_jet(manifold, potential, t, q, p),
            Self::FenchelOf(l) => {
                let v = legendre_velocity(l, t, q, p)?;
                let lj = l.jet(t, q, v.as_slice());
                hamiltonian_from_lagrangian_jet(&lj, &v, p, q)
            }
        }
    }
}

fn kinetic_jet(m: &TorusManifold, pot: &Potential, t: f64, q: &[f64], p: &[f64]) -> Result<HamiltonianJet> {
    let n = m.dim();
    let k = m.gram_inverse(q)?;
    let pv = dvec(p);
    let kp = &k * &pv;
    let dg = m.gram_derivatives(q);
    let ddg = m.gram_second_derivatives(q);
    // ∂_a K = −K ∂_a G K
    let dk: Vec<DMatrix<f64>> = dg.iter().map(|d| -(&k * d * &k)).collect();
    let dq = DVector::from_iterator(n, dk.iter().map(|d| 0.5 * pv.dot(&(d * &pv)))) + pot.gradient(t, q);
    let dqp = DMatrix::from_fn(n, n, |a, l| (&dk[a] * &pv)[l]);
    let mut dqq = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let dd = &k * (&dg[a] * &k * &dg[b] + &dg[b] * &k * &dg[a] - &ddg[a][b]) * &k;
            dqq[(a, b)] = 0.5 * pv.dot(&(dd * &pv));
        }
    }
    dqq += pot.hessian(t, q);
    Ok(HamiltonianJet {
        value: 0.5 * pv.dot(&kp) + pot.value(t, q),
        dq,
        dp: kp,
        dpp: k,
        dqp,
        dqq,
    })
}

/// Convert a Lagrangian jet at `v` (with `∂L/∂v = p`) into the dual jet.
fn hamiltonian_from_lagrangian_jet(lj: &LagrangianJet, v: &DVector<f64>, p: &[f64], q: &[f64]) -> Result<HamiltonianJet> {
    let w = lj.dvv.clone().cholesky().ok_or(Error::MetricNotPositiveDefinite { q: q.to_vec() })?.inverse();
    let pv = dvec(p);
    let cross = &lj.dqv * &w;
    Ok(HamiltonianJet {
        value: pv.dot(v) - lj.value,
        dq: -&lj.dq,
        dp: v.clone(),
        dpp: w.clone(),
        dqp: -&cross,
        dqq: -(&lj.dqq - &cross * lj.dqv.transpose()),
    })
}

/// Solves `∂L/∂v(t, q, v) = p` by damped Newton on the convex problem `min_v L − p·v`.
pub fn legendre_velocity(l: &LagrangianSystem, t: f64, q: &[f64], p: &[f64]) -> Result<DVector<f64>> {
    let fail = || Error::LegendreFailed { t, q: q.to_vec(), p: p.to_vec() };
    let pv = dvec(p);
    let mut v = l.manifold().gram_inverse(q)? * &pv;
    let tol = 1e-13 * (1.0 + pv.amax());
    let objective = |v: &DVector<f64>| l.value(t, q, v.as_slice()) - pv.dot(v);
    for _ in 0..100 {
        let j = l.jet(t, q, v.as_slice());
        let r = &j.dv - &pv;
        if r.amax() <= tol {
            return Ok(v);
        }
        let step = j.dvv.clone().cholesky().ok_or_else(fail)?.solve(&r);
        let f0 = objective(&v);
        let mut s = 1.0;
        loop {
            let cand = &v - &step * s;
            if objective(&cand) <= f0 + 1e-14 * (1.0 + f0.abs()) || s < 1e-8 {
                v = cand;
                break;
            }
            s *= 0.5;
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(fail());
        }
    }
    let r = &l.jet(t, q, v.as_slice()).dv - &pv;
    if r.amax() <= 1e3 * tol {
        Ok(v)
    } else {
        Err(fail())
    }
}

/// Fenchel transform of a Lagrangian, after verifying uniform fiberwise
/// convexity on a grid of base points and velocities.
pub fn fenchel_dual(l: &LagrangianSystem, grid: SampleGrid) -> Result<HamiltonianSystem> {
    let n = l.dim();
    let speeds = [0.0, 0.5, 2.0, 10.0];
    for q in grid.points(n) {
        for &r in &speeds {
            for dir in 0..n {
                let mut v = vec![0.0; n];
                v[dir] = r;
                let lam = symmetric_eigenvalues(&l.jet(0.0, &q, &v).dvv);
                if !(lam[0] > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Lagrangian not fiberwise convex at q = {q:?}, v = {v:?}"
                    )));
                }
            }
        }
    }
    Ok(match l {
        LagrangianSystem::Kinetic { manifold, potential } => HamiltonianSystem::kinetic(manifold.clone(), potential.clone()),
        other => HamiltonianSystem::FenchelOf(other.clone()),
    })
}

/// Lagrangian obtained by transforming a Hamiltonian back; used to check
/// that the Fenchel transform is an involution.
pub struct FenchelDualLagrangian<'a> {
    pub hamiltonian: &'a dyn Hamiltonian,
}

impl FenchelDualLagrangian<'_> {
    /// Solves `∂H/∂p(t, q, p) = v`.
    pub fn momentum(&self, t: f64, q: &[f64], v: &[f64]) -> Result<DVector<f64>> {
        let vv = dvec(v);
        let mut p = vv.clone();
        for _ in 0..100 {
            let j = self.hamiltonian.jet(t, q, p.as_slice())?;
            let r = &j.dp - &vv;
            if r.amax() <= 1e-13 * (1.0 + vv.amax()) {
                return Ok(p);
            }
            p -= j.dpp.clone().cholesky().ok_or(Error::LegendreFailed { t, q: q.to_vec(), p: p.as_slice().to_vec() })?.solve(&r);
        }
        Err(Error::LegendreFailed { t, q: q.to_vec(), p: p.as_slice().to_vec() })
    }

    pub fn jet(&self, t: f64, q: &[f64], v: &[f64]) -> Result<LagrangianJet> {
        let p = self.momentum(t, q, v)?;
        let hj = self.hamiltonian.jet(t, q, p.as_slice())?;
        let w = hj.dpp.clone().cholesky().ok_or(Error::LegendreFailed { t, q: q.to_vec(), p: p.as_slice().to_vec() })?.inverse();
        let cross = &hj.dqp * &w;
        Ok(LagrangianJet {
            value: p.dot(&dvec(v)) - hj.value,
            dq: -&hj.dq,
            dv: p,
            dvv: w,
            dqv: -&cross,
            dqq: -(&hj.dqq - &cross * hj.dqp.transpose()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::tests::{bumpy_manifold, wavy_potential};

    fn check_hamiltonian_fd(hm: &dyn Hamiltonian, t: f64, q: &[f64], p: &[f64]) {
        let n = q.len();
        let j = hm.jet(t, q, p).unwrap();
        let eps = 1e-6;
        for k in 0..n {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[k] += eps;
            qm[k] -= eps;
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[k] += eps;
            pm[k] -= eps;
            let (a, b) = (hm.jet(t, &qp, p).unwrap(), hm.jet(t, &qm, p).unwrap());
            let (c, d) = (hm.jet(t, q, &pp).unwrap(), hm.jet(t, q, &pm).unwrap());
            assert!(((a.value - b.value) / (2.0 * eps) - j.dq[k]).abs() < 1e-6);
            assert!(((c.value - d.value) / (2.0 * eps) - j.dp[k]).abs() < 1e-6);
            for m in 0..n {
                assert!(((c.dp[m] - d.dp[m]) / (2.0 * eps) - j.dpp[(m, k)]).abs() < 1e-5);
                assert!(((a.dp[m] - b.dp[m]) / (2.0 * eps) - j.dqp[(k, m)]).abs() < 1e-5);
                assert!(((a.dq[m] - b.dq[m]) / (2.0 * eps) - j.dqq[(m, k)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn kinetic_hamiltonian_matches_finite_differences() {
        let hm = HamiltonianSystem::kinetic(bumpy_manifold(), wavy_potential());
        check_hamiltonian_fd(&hm, 0.4, &[0.3, -0.2], &[0.7, 1.1]);
    }

    #[test]
    fn generic_dual_agrees_with_closed_form() {
        let l = LagrangianSystem::kinetic(bumpy_manifold(), wavy_potential());
        let closed = HamiltonianSystem::kinetic(bumpy_manifold(), wavy_potential());
        let generic = HamiltonianSystem::FenchelOf(l);
        let (q, p) = ([0.3, 0.8], [-0.6, 1.4]);
        let a = closed.jet(0.2, &q, &p).unwrap();
        let b = generic.jet(0.2, &q, &p).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.dq - b.dq).amax() < 1e-11);
        assert!((a.dqp - b.dqp).amax() < 1e-11);
        assert!((a.dqq - b.dqq).amax() < 1e-10);
    }

    #[test]
    fn softened_dual_matches_finite_differences() {
        let l = LagrangianSystem::Softened { manifold: bumpy_manifold(), potential: wavy_potential(), softening: 0.8 };
        let hm = fenchel_dual(&l, SampleGrid::new(2)).unwrap();
        check_hamiltonian_fd(&hm, 0.1, &[0.45, 0.15], &[1.3, -0.2]);
    }

    #[test]
    fn fenchel_transform_is_an_involution() {
        let l = LagrangianSystem::Softened { manifold: bumpy_manifold(), potential: wavy_potential(), softening: 0.5 };
        let hm = fenchel_dual(&l, SampleGrid::new(2)).unwrap();
        let back = FenchelDualLagrangian { hamiltonian: &hm };
        let (q, v) = ([0.2, 0.7], [0.9, -1.7]);
        let a = l.jet(0.3, &q, &v);
        let b = back.jet(0.3, &q, &v).unwrap();
        assert!((a.value - b.value).abs() < 1e-10);
        assert!((a.dv - b.dv).amax() < 1e-10);
        assert!((a.dvv - b.dvv).amax() < 1e-9);
    }

    #[test]
    fn nonconvex_lagrangian_is_rejected() {
        let l = LagrangianSystem::Softened { manifold: TorusManifold::standard(2), potential: Potential::zero(), softening: -3.0 };
        assert!(fenchel_dual(&l, SampleGrid::new(1)).is_err());
    }
}
