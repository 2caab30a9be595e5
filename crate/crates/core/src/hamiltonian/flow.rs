use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::MagneticSystem;
use crate::loopspace::io::fmt_f64;

use super::Hamiltonian;

/// `X_H` for `ω = dp∧dq + δ π*σ`:
/// `q̇ = ∂_pH`, `ṗ = −∂_qH + δΣ(q) ∂_pH`. State layout `[q; p]`.
pub fn magnetic_vector_field(hm: &dyn Hamiltonian, s: &MagneticSystem, t: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
    let n = hm.dim();
    let (q, p) = (&z.as_slice()[..n], &z.as_slice()[n..]);
    let j = hm.jet(t, q, p)?;
    let mut out = DVector::zeros(2 * n);
    let force = -&j.dq + s.effective_sigma(q) * &j.dp;
    out.rows_mut(0, n).copy_from(&j.dp);
    out.rows_mut(n, n).copy_from(&force);
    Ok(out)
}

/// Jacobian of the magnetic vector field with respect to `[q; p]`.
pub fn flow_jacobian(hm: &dyn Hamiltonian, s: &MagneticSystem, t: f64, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = hm.dim();
    let (q, p) = (&z.as_slice()[..n], &z.as_slice()[n..]);
    let j = hm.jet(t, q, p)?;
    let sig = s.effective_sigma(q);
    let dsig = s.form.sigma_derivatives(q);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    let qp_t = j.dqp.transpose();
    a.view_mut((0, 0), (n, n)).copy_from(&qp_t);
    a.view_mut((0, n), (n, n)).copy_from(&j.dpp);
    let mut pq = -&j.dqq + &sig * &qp_t;
    for k in 0..n {
        let col = &dsig[k] * &j.dp * s.delta;
        for l in 0..n {
            pq[(l, k)] += col[l];
        }
    }
    a.view_mut((n, 0), (n, n)).copy_from(&pq);
    let pp = -&j.dqp + &sig * &j.dpp;
    a.view_mut((n, n), (n, n)).copy_from(&pp);
    Ok(a)
}

/// Sampled solution of the flow.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `max_k |H(z_k) − H(z₀)|`.
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least one state")
    }
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !span.is_finite() || span < 0.0 {
        return Err(Error::InvalidParameter("integration needs dt > 0 and a finite span".into()));
    }
    Ok(((span / dt) - 1e-9).ceil().max(1.0) as usize)
}

fn rk4<F>(f: &F, t: f64, z: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, z)?;
    let k2 = f(t + 0.5 * dt, &(z + &k1 * (0.5 * dt)))?;
    let k3 = f(t + 0.5 * dt, &(z + &k2 * (0.5 * dt)))?;
    let k4 = f(t + dt, &(z + &k3 * dt))?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Fixed-step RK4 from `t0` to `t1`; the step is shrunk so it divides the
/// span evenly. `record_every` thins the stored states (the final state is
/// always kept).
pub fn integrate(
    hm: &dyn Hamiltonian,
    s: &MagneticSystem,
    z0: &DVector<f64>,
    t0: f64,
    t1: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    let n = hm.dim();
    if z0.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: z0.len() });
    }
    let steps = step_count(t1 - t0, dt)?;
    let h = (t1 - t0) / steps as f64;
    let every = record_every.max(1);
    let energy = |t: f64, z: &DVector<f64>| hm.value(t, &z.as_slice()[..n], &z.as_slice()[n..]);
    let e0 = energy(t0, z0)?;
    let f = |t: f64, z: &DVector<f64>| magnetic_vector_field(hm, s, t, z);
    let mut z = z0.clone();
    let mut traj = Trajectory { dim: n, times: vec![t0], states: vec![z.clone()], energy_drift: 0.0 };
    for k in 1..=steps {
        let t = t0 + (k - 1) as f64 * h;
        z = rk4(&f, t, &z, h)?;
        if !z.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        let tk = t0 + k as f64 * h;
        traj.energy_drift = traj.energy_drift.max((energy(tk, &z)? - e0).abs());
        if k % every == 0 || k == steps {
            traj.times.push(tk);
            traj.states.push(z.clone());
        }
    }
    Ok(traj)
}

/// Linearized return map over one period.
#[derive(Clone, Debug)]
pub struct Monodromy {
    pub matrix: DMatrix<f64>,
    pub final_state: DVector<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// `‖Φᵀ Ω(q(τ)) Φ − Ω(q(0))‖_max`.
    pub symplectic_defect: f64,
    /// `min_k |λ_k − 1|`.
    pub distance_to_one: f64,
}

impl Monodromy {
    /// Nondegenerate when no eigenvalue lies within `margin` of `1`.
    pub fn nondegenerate(&self, margin: f64) -> bool {
        self.distance_to_one >= margin
    }
}

/// Matrix of `ω = dp∧dq + δπ*σ` in `[q; p]` coordinates.
pub fn symplectic_form_matrix(s: &MagneticSystem, q: &[f64]) -> DMatrix<f64> {
    let n = s.dim();
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    w.view_mut((0, 0), (n, n)).copy_from(&s.effective_sigma(q));
    for i in 0..n {
        w[(i, n + i)] = -1.0;
        w[(n + i, i)] = 1.0;
    }
    w
}

/// Integrates the variational equation alongside the flow over `[t0, t0 + τ]`.
pub fn monodromy(
    hm: &dyn Hamiltonian,
    s: &MagneticSystem,
    z0: &DVector<f64>,
    t0: f64,
    tau: f64,
    dt: f64,
) -> Result<Monodromy> {
    let n = hm.dim();
    let m = 2 * n;
    if z0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: z0.len() });
    }
    let steps = step_count(tau, dt)?;
    let h = tau / steps as f64;
    // Augmented state [z; vec(Φ)]
    let f = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let z = y.rows(0, m).into_owned();
        let phi = DMatrix::from_column_slice(m, m, &y.as_slice()[m..]);
        let dz = magnetic_vector_field(hm, s, t, &z)?;
        let dphi = flow_jacobian(hm, s, t, &z)? * phi;
        let mut out = DVector::zeros(m + m * m);
        out.rows_mut(0, m).copy_from(&dz);
        out.rows_mut(m, m * m).copy_from_slice(dphi.as_slice());
        Ok(out)
    };
    let mut y = DVector::zeros(m + m * m);
    y.rows_mut(0, m).copy_from(z0);
    y.rows_mut(m, m * m).copy_from_slice(DMatrix::<f64>::identity(m, m).as_slice());
    for k in 0..steps {
        y = rk4(&f, t0 + k as f64 * h, &y, h)?;
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { step: k + 1 });
        }
    }
    let final_state = y.rows(0, m).into_owned();
    let matrix = DMatrix::from_column_slice(m, m, &y.as_slice()[m..]);
    let w0 = symplectic_form_matrix(s, &z0.as_slice()[..n]);
    let w1 = symplectic_form_matrix(s, &final_state.as_slice()[..n]);
    let symplectic_defect = (matrix.transpose() * w1 * &matrix - w0).amax();
    let eigenvalues: Vec<Complex<f64>> = matrix.complex_eigenvalues().iter().copied().collect();
    let distance_to_one = eigenvalues.iter().map(|l| (l - Complex::new(1.0, 0.0)).norm()).fold(f64::INFINITY, f64::min);
    Ok(Monodromy { matrix, final_state, eigenvalues, symplectic_defect, distance_to_one })
}

/// Trajectory CSV with header `t,q1..qn,p1..pn`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.dim;
    let mut s = String::from("t");
    for i in 1..=n {
        let _ = write!(s, ",q{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",p{i}");
    }
    s.push('\n');
    for (t, z) in traj.times.iter().zip(&traj.states) {
        s.push_str(&fmt_f64(*t));
        for x in z.iter() {
            s.push(',');
            s.push_str(&fmt_f64(*x));
        }
        s.push('\n');
    }
    s
}
