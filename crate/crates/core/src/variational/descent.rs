use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MagneticSystem;
use crate::lagrangian::LagrangianSystem;
use crate::loopspace::{action_total, field_norm, first_variation, l2_gradient, smooth_w12, DiscreteLoop, InnerProduct, MAX_STEP};

use super::{SolverParams, StepRule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentStep {
    pub iter: usize,
    pub action: f64,
    pub grad_norm: f64,
    /// `‖q̇‖²_{L²}`, monitored for the bounded-velocity property of descent lines.
    pub kinetic_l2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentStatus {
    Converged,
    MaxIters,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct Descent {
    pub loop_: DiscreteLoop,
    pub action: f64,
    pub grad_norm: f64,
    pub status: DescentStatus,
    pub trace: Vec<DescentStep>,
}

const ARMIJO: f64 = 1e-4;

/// Negative-gradient descent until the `L²` gradient norm drops below
/// `params.grad_tol`; a stalled line search is an error.
pub fn descend(l: &LagrangianSystem, s: &MagneticSystem, q0: &DiscreteLoop, params: &SolverParams) -> Result<Descent> {
    let d = descend_with_status(l, s, q0, params, params.grad_tol)?;
    if d.status == DescentStatus::Stalled {
        let last = d.trace.last().copied().unwrap_or(DescentStep { iter: 0, action: d.action, grad_norm: d.grad_norm, kinetic_l2: 0.0 });
        return Err(Error::DescentStalled { iter: last.iter, action: last.action, grad_norm: last.grad_norm });
    }
    Ok(d)
}

/// Descent down to gradient norm `tol`, reporting how it ended instead of
/// failing on a stall.
pub fn descend_with_status(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    q0: &DiscreteLoop,
    params: &SolverParams,
    tol: f64,
) -> Result<Descent> {
    let mut q = q0.ensure_resolution().into_owned();
    let m = l.manifold();
    let n = q.dim();
    let mut action = action_total(l, s, &q)?;
    let mut trace = Vec::new();
    let mut step = params.step;
    let mut status = DescentStatus::MaxIters;
    let mut grad_norm = f64::INFINITY;
    for iter in 0..=params.max_iters {
        let h = q.step();
        let f = first_variation(l, s, &q)?;
        let g2 = l2_gradient(l, s, &q, m)?;
        grad_norm = field_norm(&g2, h);
        trace.push(DescentStep { iter, action, grad_norm, kinetic_l2: q.kinetic_l2() });
        if !grad_norm.is_finite() || !action.is_finite() {
            return Err(Error::NonFiniteState { step: iter });
        }
        if grad_norm < tol {
            status = DescentStatus::Converged;
            break;
        }
        if iter == params.max_iters {
            break;
        }
        let dir: Vec<f64> = match params.inner {
            InnerProduct::L2 => g2.iter().map(|x| -x).collect(),
            InnerProduct::W12 => {
                let e: Vec<f64> = f.iter().map(|x| x / h).collect();
                smooth_w12(&e, n, h).into_iter().map(|x| -x).collect()
            }
        };
        let slope: f64 = f.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let trial = |s_len: f64| -> Option<DiscreteLoop> {
            let data: Vec<f64> = q.data().iter().zip(&dir).map(|(x, d)| x + s_len * d).collect();
            q.with_data(data).ok()
        };
        match params.step_rule {
            StepRule::Fixed => {
                let cand = trial(step).ok_or(Error::NonFiniteState { step: iter })?;
                action = action_total(l, s, &cand)?;
                q = cand;
            }
            StepRule::Backtracking => {
                let mut s_len = (2.0 * step).min(1e3);
                let mut accepted = None;
                while s_len > 1e-14 {
                    if let Some(cand) = trial(s_len) {
                        if cand.max_step() <= MAX_STEP {
                            let a = action_total(l, s, &cand)?;
                            let decrease = ARMIJO * s_len * slope;
                            let ok = if decrease.abs() < 1e-15 * (1.0 + action.abs()) {
                                a <= action
                            } else {
                                a <= action + decrease
                            };
                            if ok {
                                accepted = Some((cand, a));
                                break;
                            }
                        }
                    }
                    s_len *= 0.5;
                }
                match accepted {
                    Some((cand, a)) => {
                        q = cand;
                        action = a;
                        step = s_len;
                    }
                    None => {
                        status = DescentStatus::Stalled;
                        break;
                    }
                }
            }
        }
    }
    Ok(Descent { loop_: q, action, grad_norm, status, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::geometry::{MagneticForm, TorusManifold};
    use crate::loopspace::{random_loop, RandomLoopSpec};
    use rand::SeedableRng;

    #[test]
    fn action_decreases_monotonically() {
        let l = LagrangianSystem::kinetic(TorusManifold::standard(2), FourierSeries::mode(0.3, vec![1, 0]));
        let s = MagneticSystem::new(MagneticForm::area(1.0), 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let q0 = random_loop(&mut rng, &[0, 0], 1.0, RandomLoopSpec { samples: 32, ..Default::default() }).unwrap();
        let params = SolverParams { grad_tol: 1e-6, ..Default::default() };
        let d = descend(&l, &s, &q0, &params).unwrap();
        assert_eq!(d.status, DescentStatus::Converged);
        for w in d.trace.windows(2) {
            assert!(w[1].action <= w[0].action + 1e-14);
        }
    }

    #[test]
    fn l2_and_fixed_steps_also_descend() {
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::zero(2), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let q0 = random_loop(&mut rng, &[1, 0], 1.0, RandomLoopSpec { samples: 16, ..Default::default() }).unwrap();
        let params = SolverParams { inner: InnerProduct::L2, max_iters: 50, ..Default::default() };
        let d = descend_with_status(&l, &s, &q0, &params, 1e-10).unwrap();
        assert!(d.action < d.trace[0].action);
        let fixed = SolverParams { step_rule: StepRule::Fixed, step: 0.5, max_iters: 50, ..Default::default() };
        let d = descend_with_status(&l, &s, &q0, &fixed, 1e-10).unwrap();
        assert!(d.action < d.trace[0].action);
    }
}
