use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::MagneticSystem;
use crate::lagrangian::LagrangianSystem;
use crate::loopspace::{legendre_lift, CotangentLoop, DiscreteLoop};

use super::{fenchel_dual, integrate, monodromy, Hamiltonian, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrosscheckOptions {
    /// Upper bound for the RK4 step; the used step divides `h = τ/N`.
    pub dt: f64,
    /// Closure tolerance on `max(|q(τ) − q₀ − α|, |p(τ) − p₀|)`.
    pub closure_tol: f64,
    /// Floquet multipliers closer than this to `1` flag degeneracy.
    pub degeneracy_margin: f64,
    /// Loop doublings (each followed by Newton) before a record is checked;
    /// only used by `crosscheck_record`.
    pub refine: usize,
}

impl Default for CrosscheckOptions {
    fn default() -> Self {
        Self { dt: 1e-3, closure_tol: 1e-4, degeneracy_margin: 1e-4, refine: 2 }
    }
}

/// Agreement between a discrete critical loop and the Hamiltonian flow of its Legendre lift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub closure_residual: f64,
    /// Largest deviation between flow and lifted loop at the sample times.
    pub node_deviation: f64,
    pub energy_drift: f64,
    pub symplectic_defect: f64,
    pub floquet_distance_to_one: f64,
    pub closes: bool,
    pub nondegenerate: bool,
}

/// Integrates the flow from the Legendre lift of `q` for one period and
/// compares it with the loop; also computes the monodromy.
pub fn crosscheck_orbit(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    q: &DiscreteLoop,
    opts: CrosscheckOptions,
) -> Result<CrosscheckReport> {
    let hm = fenchel_dual(l, crate::geometry::SampleGrid::new(1))?;
    let lift = legendre_lift(l, q)?;
    let n = q.dim();
    let per_segment = (q.step() / opts.dt).ceil().max(1.0) as usize;
    let dt = q.step() / per_segment as f64;
    let z0 = phase_point(&lift, 0);
    let traj = integrate(&hm, s, &z0, 0.0, q.tau(), dt, per_segment)?;
    let node_deviation = node_deviation(&traj, &lift);
    let end = traj.last();
    let mut closure_residual = 0.0_f64;
    for i in 0..n {
        closure_residual = closure_residual.max((end[i] - z0[i] - q.winding()[i] as f64).abs());
        closure_residual = closure_residual.max((end[n + i] - z0[n + i]).abs());
    }
    let mono = monodromy(&hm as &dyn Hamiltonian, s, &z0, 0.0, q.tau(), dt)?;
    Ok(CrosscheckReport {
        closure_residual,
        node_deviation,
        energy_drift: traj.energy_drift,
        symplectic_defect: mono.symplectic_defect,
        floquet_distance_to_one: mono.distance_to_one,
        closes: closure_residual < opts.closure_tol,
        nondegenerate: mono.nondegenerate(opts.degeneracy_margin),
    })
}

fn phase_point(x: &CotangentLoop, j: usize) -> DVector<f64> {
    let n = x.base.dim();
    let mut z = DVector::zeros(2 * n);
    z.rows_mut(0, n).copy_from_slice(&x.base.extended(j as isize));
    z.rows_mut(n, n).copy_from_slice(x.momentum(j));
    z
}

/// `max_j ‖z(t_j) − (x̃_j, p_j)‖_∞` for a trajectory recorded at the sample times.
pub fn node_deviation(traj: &Trajectory, x: &CotangentLoop) -> f64 {
    traj.states
        .iter()
        .enumerate()
        .map(|(j, z)| (z - phase_point(x, j)).amax())
        .fold(0.0, f64::max)
}
