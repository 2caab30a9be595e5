//! Critical points of the discrete magnetic action: gradient descent,
//! Newton refinement, Morse indices and seeded multi-start surveys.

mod descent;
mod index;
mod newton;
mod survey;

pub use descent::{descend, descend_with_status, Descent, DescentStatus, DescentStep};
pub use index::{morse_index, MorseData, DENSE_LIMIT};
pub use newton::refine_newton;
pub use survey::{crosscheck_record, multi_start_survey, orbit_distance, SeedRun, Survey};

use serde::{Deserialize, Serialize};

use crate::loopspace::{DiscreteLoop, InnerProduct, RandomLoopSpec};

/// Step-size rule for gradient descent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed,
    /// Armijo backtracking, the initial trial step adapted from the last accepted one.
    #[default]
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Fixed step, or the first trial step for backtracking.
    pub step: f64,
    pub inner: InnerProduct,
    /// Certificate threshold on the `L²` gradient norm.
    pub grad_tol: f64,
    /// Gradient norm at which descent hands over to Newton.
    pub newton_switch_tol: f64,
    pub max_newton_iters: usize,
    /// Eigenvalues with `|λ| ≤ tol_null · max(1, ‖H‖)` count as null.
    pub tol_null: f64,
    pub seeds: usize,
    pub rng_seed: u64,
    pub samples: usize,
    pub modes: usize,
    pub amplitude: f64,
    /// Action tolerance for deduplication.
    pub dedup_action_tol: f64,
    /// Loop-distance tolerance for deduplication.
    pub dedup_distance_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_rule: StepRule::Backtracking,
            step: 1.0,
            inner: InnerProduct::W12,
            grad_tol: 1e-8,
            newton_switch_tol: 1e-3,
            max_newton_iters: 40,
            tol_null: 1e-6,
            seeds: 16,
            rng_seed: 0,
            samples: 64,
            modes: 3,
            amplitude: 0.2,
            dedup_action_tol: 1e-6,
            dedup_distance_tol: 1e-4,
        }
    }
}

impl SolverParams {
    pub fn random_spec(&self) -> RandomLoopSpec {
        RandomLoopSpec { samples: self.samples, modes: self.modes, amplitude: self.amplitude }
    }
}

/// A certified (or attempted) critical loop with its diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    #[serde(rename = "loop")]
    pub loop_: DiscreteLoop,
    pub action: f64,
    pub el_residual: f64,
    pub grad_norm: f64,
    pub morse_index: usize,
    pub nullity: usize,
    pub nondegenerate: bool,
    pub flow_closure_residual: Option<f64>,
    pub resolution: usize,
    pub seed: Option<u64>,
}

impl OrbitRecord {
    /// Certificate: EL residual below `1e-8` and gradient norm below `grad_tol`.
    pub fn certified(&self, grad_tol: f64) -> bool {
        self.el_residual < 1e-8 && self.grad_norm < grad_tol
    }
}
