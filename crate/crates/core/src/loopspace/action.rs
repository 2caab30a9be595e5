use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{gauss_legendre_8, MagneticForm, MagneticSystem};
use crate::hamiltonian::Hamiltonian;
use crate::lagrangian::Lagrangian;

use super::{CotangentLoop, DiscreteLoop};

/// Grid size per axis for the sweep-torus flux test.
pub const ATOROIDAL_RESOLUTION: usize = 16;
const ATOROIDAL_TOL: f64 = 1e-8;

/// True when `σ` integrates to zero over every torus swept by a loop in
/// class `α` under the coordinate flows `s ↦ s e_j`.
///
/// The flux is evaluated with the midpoint rule on a `resolution²` grid,
/// which is exact for the trigonometric coefficients of low frequency.
pub fn atoroidal_test(s: &MagneticForm, winding: &[i64], resolution: usize) -> bool {
    let n = s.dim();
    if winding.iter().all(|a| *a == 0) {
        return true;
    }
    let alpha = DVector::from_iterator(n, winding.iter().map(|a| *a as f64));
    (0..n).all(|j| {
        let mut flux = 0.0;
        for a in 0..resolution {
            for b in 0..resolution {
                let u = (a as f64 + 0.5) / resolution as f64;
                let v = (b as f64 + 0.5) / resolution as f64;
                let q: Vec<f64> = (0..n).map(|i| if i == j { u } else { 0.0 } + v * alpha[i]).collect();
                flux += (s.sigma_matrix(&q) * &alpha)[j];
            }
        }
        (flux / (resolution * resolution) as f64).abs() < ATOROIDAL_TOL
    })
}

/// Gauge-normalized `σ`-action.
///
/// Integrates `σ̃` over a cylinder joining the lifted loop at time `0` to the
/// straight reference loop `t ↦ tα` from the origin, with straight connecting
/// segments. On atoroidal classes this is independent of the cylinder and
/// invariant under lattice translations of the lift. Loops violating the
/// resolution guard are refined first.
pub fn action_sigma(s: &MagneticForm, q: &DiscreteLoop) -> Result<f64> {
    check_dim(s.dim(), q)?;
    if !atoroidal_test(s, q.winding(), ATOROIDAL_RESOLUTION) {
        return Err(Error::NotAtoroidal { winding: q.winding().to_vec() });
    }
    let q = q.ensure_resolution();
    Ok(sigma_line_integral(s, &q) + sigma_correction(s, q.winding(), q.point(0)))
}

/// `Σ_j θ(m_j)·(x̃_{j+1} − x̃_j)` with `m_j` the segment midpoint.
pub(crate) fn sigma_line_integral(s: &MagneticForm, q: &DiscreteLoop) -> f64 {
    (0..q.len())
        .map(|j| {
            let (a, b) = q.segment(j);
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let th = s.primitive(&m);
            a.iter().zip(&b).enumerate().map(|(k, (x, y))| th[k] * (y - x)).sum::<f64>()
        })
        .sum()
}

/// Boundary terms of the cylinder: `−θ(α)·x̃₀ − ∫_ref θ`.
pub(crate) fn sigma_correction(s: &MagneticForm, winding: &[i64], x0: &[f64]) -> f64 {
    let c = s.lattice_shift(winding);
    let alpha: Vec<f64> = winding.iter().map(|a| *a as f64).collect();
    let side: f64 = c.iter().zip(x0).map(|(ci, x)| ci * x).sum();
    let reference = gauss_legendre_8(|t| {
        let p: Vec<f64> = alpha.iter().map(|a| a * t).collect();
        s.primitive(&p).iter().zip(&alpha).map(|(th, a)| th * a).sum()
    });
    -side - reference
}

/// Lagrangian action `Σ_j h L(t_{j+½}, m_j, v_j)` (midpoint rule).
pub fn action_lagrangian(l: &dyn Lagrangian, q: &DiscreteLoop) -> Result<f64> {
    check_dim(l.dim(), q)?;
    let h = q.step();
    Ok((0..q.len())
        .map(|j| {
            let (a, b) = q.segment(j);
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let v: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x) / h).collect();
            h * l.value((j as f64 + 0.5) * h, &m, &v)
        })
        .sum())
}

/// `S_{L,δσ} = S_L + δ 𝒜_σ`.
pub fn action_total(l: &dyn Lagrangian, s: &MagneticSystem, q: &DiscreteLoop) -> Result<f64> {
    let kinetic = action_lagrangian(l, q)?;
    if s.delta == 0.0 || s.form.is_zero() {
        return Ok(kinetic);
    }
    Ok(kinetic + s.delta * action_sigma(&s.form, q)?)
}

/// Discrete Hamiltonian action `Σ_j h [p̄_j·v_j − H(t_{j+½}, m_j, p̄_j)] + δ𝒜_σ`
/// with `p̄_j` the average of the momenta at the segment ends.
pub fn action_hamiltonian(hm: &dyn Hamiltonian, s: &MagneticSystem, x: &CotangentLoop) -> Result<f64> {
    let q = &x.base;
    check_dim(hm.dim(), q)?;
    let h = q.step();
    let mut total = 0.0;
    for j in 0..q.len() {
        let (a, b) = q.segment(j);
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let p: Vec<f64> = x.momentum(j).iter().zip(x.momentum(j + 1)).map(|(u, w)| 0.5 * (u + w)).collect();
        let pv: f64 = a.iter().zip(&b).zip(&p).map(|((x, y), pk)| pk * (y - x)).sum();
        total += pv - h * hm.value((j as f64 + 0.5) * h, &m, &p)?;
    }
    if s.delta != 0.0 && !s.form.is_zero() {
        total += s.delta * action_sigma(&s.form, q)?;
    }
    Ok(total)
}

pub(crate) fn check_dim(n: usize, q: &DiscreteLoop) -> Result<()> {
    if q.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.dim() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PlanarTerm, TorusManifold};
    use crate::lagrangian::LagrangianSystem;

    #[test]
    fn circle_area_is_pi_r_squared() {
        let c = DiscreteLoop::circle(&[0.3, 0.4], (0, 1), 0.1, 1, 1.0, 512).unwrap();
        let a = action_sigma(&MagneticForm::area(1.0), &c).unwrap();
        assert!((a - std::f64::consts::PI * 0.01).abs() < 1e-6);
        let cw = DiscreteLoop::circle(&[0.3, 0.4], (0, 1), 0.1, -1, 1.0, 512).unwrap();
        assert!((action_sigma(&MagneticForm::area(1.0), &cw).unwrap() + a).abs() < 1e-15);
    }

    #[test]
    fn reference_straight_line_has_zero_action() {
        let s = MagneticForm::new(3, vec![PlanarTerm { i: 0, j: 1, strength: 1.0, modulation: 0.3 }]).unwrap();
        let q = DiscreteLoop::straight(&[0.0, 0.0, 0.0], vec![0, 0, 1], 1.0, 16).unwrap();
        assert!(action_sigma(&s, &q).unwrap().abs() < 1e-15);
    }

    #[test]
    fn non_atoroidal_class_is_rejected() {
        let q = DiscreteLoop::straight(&[0.0, 0.0], vec![1, 0], 1.0, 16).unwrap();
        assert!(matches!(action_sigma(&MagneticForm::area(1.0), &q), Err(Error::NotAtoroidal { .. })));
        assert!(!atoroidal_test(&MagneticForm::area(1.0), &[1, 0], 16));
        assert!(atoroidal_test(&MagneticForm::planar(3, 0, 1, 1.0).unwrap(), &[0, 0, 1], 16));
    }

    #[test]
    fn free_straight_line_action() {
        // ½|α|²/τ for n = 2, α = (n, 0), τ = 1
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        for k in 1..4 {
            let q = DiscreteLoop::straight(&[0.1, 0.2], vec![k, 0], 1.0, 32).unwrap();
            let a = action_lagrangian(&l, &q).unwrap();
            assert!((a - 0.5 * (k * k) as f64).abs() < 1e-12);
        }
    }
}
