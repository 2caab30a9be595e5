use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::MagneticSystem;
use crate::lagrangian::Lagrangian;
use crate::linalg::{solve_circulant_tridiagonal, spd_inverse};

use super::action::check_dim;
use super::{CotangentLoop, DiscreteLoop};

/// Inner product used to turn the first variation into a gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerProduct {
    L2,
    /// Discrete `W^{1,2}`, i.e. the `L²` gradient smoothed by `(1 − Δ_h)⁻¹`.
    #[default]
    W12,
}

struct Segment {
    t: f64,
    m: Vec<f64>,
    w: DVector<f64>,
}

fn segments(q: &DiscreteLoop) -> impl Iterator<Item = Segment> + '_ {
    let h = q.step();
    (0..q.len()).map(move |j| {
        let (a, b) = q.segment(j);
        Segment {
            t: (j as f64 + 0.5) * h,
            m: a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect(),
            w: DVector::from_iterator(a.len(), a.iter().zip(&b).map(|(x, y)| y - x)),
        }
    })
}

/// Partial derivatives `∂S/∂x̃_j` of the discrete action, flattened
/// sample-major. Requires a primitive when `δσ ≠ 0`.
pub fn first_variation(l: &dyn Lagrangian, s: &MagneticSystem, q: &DiscreteLoop) -> Result<Vec<f64>> {
    check_dim(l.dim(), q)?;
    let n = q.dim();
    let nn = q.len();
    let h = q.step();
    let d = s.delta;
    let mut g = vec![0.0; n * nn];
    for (j, seg) in segments(q).enumerate() {
        let v = &seg.w / h;
        let jet = l.jet(seg.t, &seg.m, v.as_slice());
        let mut fm = &jet.dq * h;
        let mut fw = jet.dv.clone();
        if d != 0.0 {
            fm += s.form.primitive_jacobian(&seg.m).transpose() * &seg.w * d;
            fw += s.form.primitive(&seg.m) * d;
        }
        let k = (j + 1) % nn;
        for i in 0..n {
            g[j * n + i] += 0.5 * fm[i] - fw[i];
            g[k * n + i] += 0.5 * fm[i] + fw[i];
        }
    }
    if d != 0.0 {
        let c = s.form.lattice_shift(q.winding());
        for i in 0..n {
            g[i] -= d * c[i];
        }
    }
    Ok(g)
}

/// Riemannian `L²` gradient `G(x̃_j)⁻¹ (∂S/∂x̃_j)/h`, flattened.
pub fn l2_gradient(l: &dyn Lagrangian, s: &MagneticSystem, q: &DiscreteLoop, m: &crate::geometry::TorusManifold) -> Result<Vec<f64>> {
    let f = first_variation(l, s, q)?;
    let n = q.dim();
    let h = q.step();
    let mut out = vec![0.0; f.len()];
    for (j, p) in q.points().enumerate() {
        let ginv = spd_inverse(&m.gram(p), p)?;
        let gj = ginv * DVector::from_column_slice(&f[j * n..(j + 1) * n]) / h;
        out[j * n..(j + 1) * n].copy_from_slice(gj.as_slice());
    }
    Ok(out)
}

/// Gradient of the action for the chosen inner product, flattened.
pub fn gradient(
    l: &dyn Lagrangian,
    s: &MagneticSystem,
    q: &DiscreteLoop,
    m: &crate::geometry::TorusManifold,
    inner: InnerProduct,
) -> Result<Vec<f64>> {
    match inner {
        InnerProduct::L2 => l2_gradient(l, s, q, m),
        InnerProduct::W12 => {
            let h = q.step();
            let f: Vec<f64> = first_variation(l, s, q)?.into_iter().map(|x| x / h).collect();
            Ok(smooth_w12(&f, q.dim(), h))
        }
    }
}

/// Applies `(1 − Δ_h)⁻¹` coordinate-wise to a flattened loop field.
pub fn smooth_w12(f: &[f64], n: usize, h: f64) -> Vec<f64> {
    let nn = f.len() / n;
    let mut out = vec![0.0; f.len()];
    for i in 0..n {
        let col: Vec<f64> = (0..nn).map(|j| f[j * n + i]).collect();
        let sol = solve_circulant_tridiagonal(1.0 + 2.0 / (h * h), -1.0 / (h * h), &col);
        for j in 0..nn {
            out[j * n + i] = sol[j];
        }
    }
    out
}

/// Discrete Euler–Lagrange residual `sup_j |G⁻¹ ∂S/∂x̃_j / h|`.
pub fn el_residual(l: &dyn Lagrangian, s: &MagneticSystem, q: &DiscreteLoop, m: &crate::geometry::TorusManifold) -> Result<f64> {
    let g = l2_gradient(l, s, q, m)?;
    Ok(g.chunks_exact(q.dim()).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max))
}

/// Discrete `L²` norm `(Σ_j h |g_j|²)^{1/2}` of a flattened field.
pub fn field_norm(g: &[f64], h: f64) -> f64 {
    (h * g.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Second variation as a dense symmetric `nN × nN` matrix in the `L²`
/// scaling `(∂²S/∂x̃∂x̃)/h`.
pub fn hessian(l: &dyn Lagrangian, s: &MagneticSystem, q: &DiscreteLoop) -> Result<DMatrix<f64>> {
    check_dim(l.dim(), q)?;
    let n = q.dim();
    let nn = q.len();
    let h = q.step();
    let d = s.delta;
    let mut hm = DMatrix::zeros(n * nn, n * nn);
    for (j, seg) in segments(q).enumerate() {
        let v = &seg.w / h;
        let jet = l.jet(seg.t, &seg.m, v.as_slice());
        let mut fmm = &jet.dqq * h;
        let mut fmw = jet.dqv.clone();
        let fww = &jet.dvv / h;
        if d != 0.0 {
            fmm += s.form.primitive_hessian_contracted(&seg.m, &seg.w) * d;
            fmw += s.form.primitive_jacobian(&seg.m).transpose() * d;
        }
        let fwm = fmw.transpose();
        let aa = &fmm * 0.25 - &fmw * 0.5 - &fwm * 0.5 + &fww;
        let ab = &fmm * 0.25 + &fmw * 0.5 - &fwm * 0.5 - &fww;
        let bb = &fmm * 0.25 + &fmw * 0.5 + &fwm * 0.5 + &fww;
        let (ia, ib) = (j * n, ((j + 1) % nn) * n);
        for r in 0..n {
            for c in 0..n {
                hm[(ia + r, ia + c)] += aa[(r, c)];
                hm[(ia + r, ib + c)] += ab[(r, c)];
                hm[(ib + r, ia + c)] += ab[(c, r)];
                hm[(ib + r, ib + c)] += bb[(r, c)];
            }
        }
    }
    hm /= h;
    let sym = (&hm + hm.transpose()) * 0.5;
    Ok(sym)
}

/// Legendre lift `p_j = ∂L/∂v(t_j, x̃_j, v_j)` with centered velocities.
pub fn legendre_lift(l: &dyn Lagrangian, q: &DiscreteLoop) -> Result<CotangentLoop> {
    check_dim(l.dim(), q)?;
    let mut p = Vec::with_capacity(q.data().len());
    for j in 0..q.len() {
        let v = q.node_velocity(j);
        p.extend_from_slice(l.jet(q.time(j), q.point(j), v.as_slice()).dv.as_slice());
    }
    CotangentLoop::new(q.clone(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::geometry::{MagneticForm, PlanarTerm, TorusManifold};
    use crate::lagrangian::tests::{bumpy_manifold, wavy_potential};
    use crate::lagrangian::LagrangianSystem;
    use crate::loopspace::{action_total, random_loop, RandomLoopSpec};
    use rand::SeedableRng;

    fn modulated_system() -> (LagrangianSystem, MagneticSystem) {
        let l = LagrangianSystem::kinetic(bumpy_manifold(), wavy_potential());
        let form = MagneticForm::new(2, vec![PlanarTerm { i: 0, j: 1, strength: 0.0, modulation: 0.7 }]).unwrap();
        (l, MagneticSystem::new(form, 1.3))
    }

    fn sample_loop(winding: Vec<i64>) -> DiscreteLoop {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        random_loop(&mut rng, &winding, 0.8, RandomLoopSpec { samples: 16, ..Default::default() }).unwrap()
    }

    #[test]
    fn first_variation_matches_finite_differences() {
        let (l, s) = modulated_system();
        let q = sample_loop(vec![1, 0]);
        let g = first_variation(&l, &s, &q).unwrap();
        let eps = 1e-6;
        for idx in [0, 1, 7, 30, 31] {
            let mut a = q.data().to_vec();
            let mut b = q.data().to_vec();
            a[idx] += eps;
            b[idx] -= eps;
            let fd = (action_total(&l, &s, &q.with_data(a).unwrap()).unwrap()
                - action_total(&l, &s, &q.with_data(b).unwrap()).unwrap())
                / (2.0 * eps);
            assert!((fd - g[idx]).abs() < 1e-5, "{idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn first_variation_with_linear_primitive_includes_boundary_term() {
        let l = LagrangianSystem::free(TorusManifold::standard(3));
        let s = MagneticSystem::new(MagneticForm::new(3, vec![PlanarTerm { i: 0, j: 1, strength: 1.0, modulation: 0.3 }]).unwrap(), 2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let q = random_loop(&mut rng, &[0, 0, 1], 1.0, RandomLoopSpec { samples: 12, ..Default::default() }).unwrap();
        let g = first_variation(&l, &s, &q).unwrap();
        let eps = 1e-6;
        for idx in 0..6 {
            let mut a = q.data().to_vec();
            let mut b = q.data().to_vec();
            a[idx] += eps;
            b[idx] -= eps;
            let fd = (action_total(&l, &s, &q.with_data(a).unwrap()).unwrap()
                - action_total(&l, &s, &q.with_data(b).unwrap()).unwrap())
                / (2.0 * eps);
            assert!((fd - g[idx]).abs() < 1e-5, "{idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn hessian_is_derivative_of_gradient() {
        let (l, s) = modulated_system();
        let q = sample_loop(vec![0, 1]);
        let hm = hessian(&l, &s, &q).unwrap();
        let h = q.step();
        let eps = 1e-6;
        for idx in [0, 5, 18] {
            let mut a = q.data().to_vec();
            let mut b = q.data().to_vec();
            a[idx] += eps;
            b[idx] -= eps;
            let ga = first_variation(&l, &s, &q.with_data(a).unwrap()).unwrap();
            let gb = first_variation(&l, &s, &q.with_data(b).unwrap()).unwrap();
            for r in 0..ga.len() {
                let fd = (ga[r] - gb[r]) / (2.0 * eps) / h;
                assert!((fd - hm[(r, idx)]).abs() < 1e-4 * (1.0 + fd.abs()), "({r},{idx})");
            }
        }
    }

    #[test]
    fn w12_gradient_is_descent_direction() {
        let (l, s) = modulated_system();
        let q = sample_loop(vec![1, 1]);
        let f = first_variation(&l, &s, &q).unwrap();
        let g = gradient(&l, &s, &q, l.manifold(), InnerProduct::W12).unwrap();
        assert!(f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() > 0.0);
    }

    #[test]
    fn constant_loop_of_free_particle_is_critical() {
        let l = LagrangianSystem::kinetic(TorusManifold::standard(2), FourierSeries::zero());
        let s = MagneticSystem::new(MagneticForm::area(1.0), 2.0);
        let q = DiscreteLoop::constant(&[0.4, 0.9], 1.0, 16).unwrap();
        assert!(el_residual(&l, &s, &q, l.manifold()).unwrap() < 1e-12);
    }
}
