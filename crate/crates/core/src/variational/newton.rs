use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::MagneticSystem;
use crate::lagrangian::LagrangianSystem;
use crate::linalg::sorted_symmetric_eigen;
use crate::loopspace::{action_total, el_residual, field_norm, first_variation, hessian, l2_gradient, DiscreteLoop, MAX_STEP};

use super::index::morse_from_hessian;
use super::{OrbitRecord, SolverParams};

const TARGET_RESIDUAL: f64 = 1e-12;

/// Newton iteration on `∂S = 0` restricted to the complement of the
/// near-null eigenspace of the Hessian, so that symmetry orbits of critical
/// points are not an obstruction.
///
/// Fails with `DegenerateCriticalPoint` when the residual stays above the
/// certificate level while its component along the null space dominates.
pub fn refine_newton(l: &LagrangianSystem, s: &MagneticSystem, q: &DiscreteLoop, params: &SolverParams) -> Result<OrbitRecord> {
    let mut q = q.ensure_resolution().into_owned();
    let m = l.manifold();
    let mut null_fraction = 0.0;
    let merit = |q: &DiscreteLoop| -> Result<f64> {
        let f = first_variation(l, s, q)?;
        Ok(field_norm(&f, 1.0) / q.step())
    };
    let mut current = merit(&q)?;
    for _ in 0..params.max_newton_iters {
        if el_residual(l, s, &q, m)? < TARGET_RESIDUAL {
            break;
        }
        let h = q.step();
        let f = DVector::from_vec(first_variation(l, s, &q)?) / h;
        let hm = hessian(l, s, &q)?;
        let (values, vectors) = sorted_symmetric_eigen(&hm);
        let scale = values.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
        let thr = params.tol_null * scale;
        let mut delta = DVector::zeros(f.len());
        let mut null_part = 0.0;
        for (k, lam) in values.iter().enumerate() {
            let v = vectors.column(k);
            let c = v.dot(&f);
            if lam.abs() > thr {
                delta -= v * (c / lam);
            } else {
                null_part += c * c;
            }
        }
        null_fraction = null_part.sqrt() / f.norm().max(f64::MIN_POSITIVE);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let data: Vec<f64> = q.data().iter().zip(delta.iter()).map(|(x, d)| x + t * d).collect();
            if let Ok(cand) = q.with_data(data) {
                if cand.max_step() <= MAX_STEP {
                    let r = merit(&cand)?;
                    if r < current {
                        q = cand;
                        current = r;
                        improved = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = el_residual(l, s, &q, m)?;
    if residual >= 1e-8 && null_fraction > 0.5 {
        return Err(Error::DegenerateCriticalPoint { residual });
    }
    let hm = hessian(l, s, &q)?;
    let morse = morse_from_hessian(&hm, params.tol_null);
    let g2 = l2_gradient(l, s, &q, m)?;
    Ok(OrbitRecord {
        action: action_total(l, s, &q)?,
        el_residual: residual,
        grad_norm: field_norm(&g2, q.step()),
        morse_index: morse.index,
        nullity: morse.nullity,
        nondegenerate: morse.nullity == 0,
        flow_closure_residual: None,
        resolution: q.len(),
        seed: None,
        loop_: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::geometry::{MagneticForm, TorusManifold};
    use std::f64::consts::PI;

    #[test]
    fn newton_converges_to_magnetic_circle() {
        // discrete resonance: one full turn per period at this τ
        let (n, delta) = (64usize, 7.0);
        let tau = 2.0 * n as f64 * (PI / n as f64).tan() / delta;
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::area(1.0), delta);
        let r = 0.1;
        let seed = DiscreteLoop::from_fn(2, vec![0, 0], tau, n, |t| {
            let a = 2.0 * PI * t / tau;
            vec![0.5 + 1.1 * r * a.cos(), 0.5 - 0.9 * r * a.sin()]
        })
        .unwrap();
        let rec = refine_newton(&l, &s, &seed, &SolverParams::default()).unwrap();
        assert!(rec.el_residual < 1e-10, "{}", rec.el_residual);
        let c = rec.loop_.mean();
        let radii: Vec<f64> = rec
            .loop_
            .points()
            .map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
            .collect();
        let spread = radii.iter().cloned().fold(0.0, f64::max) - radii.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-8);
    }

    #[test]
    fn newton_finds_potential_minimum() {
        let l = LagrangianSystem::kinetic(TorusManifold::standard(2), FourierSeries::mode(-0.5, vec![1, 0]));
        let s = MagneticSystem::new(MagneticForm::zero(2), 0.0);
        let q = DiscreteLoop::constant(&[0.05, 0.3], 0.5, 16).unwrap();
        let rec = refine_newton(&l, &s, &q, &SolverParams::default()).unwrap();
        assert!(rec.el_residual < 1e-12);
        assert!(rec.loop_.point(0)[0].abs() < 1e-10);
    }
}
