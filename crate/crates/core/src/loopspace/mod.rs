//! Discretized free loop space of `𝕋ⁿ`: loops, actions and their first and
//! second variations.
//!
//! A loop is stored by `N` samples of a lift to `ℝⁿ` together with its
//! winding `α`. Actions use forward differences on segments with midpoint
//! evaluation, so the discrete action is an exact function of the samples
//! and its gradient and Hessian are exact derivatives of it.

mod action;
mod discrete;
pub mod io;
mod variation;

pub use action::{action_hamiltonian, action_lagrangian, action_sigma, action_total, atoroidal_test, ATOROIDAL_RESOLUTION};
pub use discrete::{random_loop, CotangentLoop, DiscreteLoop, RandomLoopSpec, MAX_STEP, MIN_SAMPLES};
pub use variation::{
    el_residual, field_norm, first_variation, gradient, hessian, l2_gradient, legendre_lift, smooth_w12, InnerProduct,
};
