use serde::{Deserialize, Serialize};

use crate::fourier::{CosineTerm, FourierSeries};
use crate::hamiltonian::CrosscheckOptions;
use crate::variational::SolverParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Orbits,
    Constants,
    Isoperimetric,
    Flow,
    IndexSweep,
    #[default]
    FullReport,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Orbits => "orbits",
            Self::Constants => "constants",
            Self::Isoperimetric => "isoperimetric",
            Self::Flow => "flow",
            Self::IndexSweep => "index_sweep",
            Self::FullReport => "full_report",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub scenario: ScenarioKind,
    pub manifold: ManifoldConfig,
    #[serde(default)]
    pub sigma: SigmaConfig,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub class: ClassConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub crosscheck: CrosscheckOptions,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub index_sweep: IndexSweepConfig,
    #[serde(default)]
    pub isoperimetric: IsoperimetricConfig,
    #[serde(default)]
    pub expect: ExpectConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    #[default]
    Flat,
    Conformal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub dim: usize,
    #[serde(default)]
    pub metric: MetricName,
    /// Gram matrix `G` (flat) or `G₀` (conformal); identity when absent.
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    /// Conformal exponent `f` with `g = e^{2f} G₀`.
    #[serde(default)]
    pub factor: Vec<CosineTerm>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveChoice {
    #[default]
    Linear,
    None,
}

/// `(strength + modulation·cos 2πq_i) dq_i ∧ dq_j` with 1-based indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaTerm {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
    #[serde(default)]
    pub modulation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub terms: Vec<SigmaTerm>,
    #[serde(default)]
    pub primitive: PrimitiveChoice,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Kinetic,
    Softened,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub family: Family,
    pub softening: f64,
    pub potential: Vec<CosineTerm>,
    pub tau: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { family: Family::Kinetic, softening: 0.0, potential: Vec::new(), tau: 1.0 }
    }
}

impl SystemConfig {
    pub fn potential_series(&self) -> FourierSeries {
        FourierSeries { terms: self.potential.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassConfig {
    pub winding: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub q0: Option<Vec<f64>>,
    pub p0: Option<Vec<f64>>,
    /// Integration time; `system.tau` when absent.
    pub t_end: Option<f64>,
    pub dt: f64,
    pub record_every: usize,
    pub energy_tol: f64,
    /// When set, the final state must return to the initial one within this tolerance.
    pub return_tol: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { q0: None, p0: None, t_end: None, dt: 1e-3, record_every: 1, energy_tol: 1e-8, return_tol: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSweepConfig {
    pub deltas: Vec<f64>,
    pub resolutions: Vec<usize>,
    /// Base point of the constant loop; the origin when absent.
    pub base_point: Option<Vec<f64>>,
}

impl Default for IndexSweepConfig {
    fn default() -> Self {
        Self { deltas: vec![5.0, 6.0, 6.2, 6.4, 7.0], resolutions: vec![64, 128], base_point: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsoperimetricConfig {
    pub samples: usize,
    pub coercivity: bool,
    pub palais_smale_runs: usize,
}

impl Default for IsoperimetricConfig {
    fn default() -> Self {
        Self { samples: 1000, coercivity: true, palais_smale_runs: 0 }
    }
}

/// Expected values turned into named assertions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpectConfig {
    #[serde(rename = "C0")]
    pub c0: Option<f64>,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    pub delta0: Option<f64>,
    pub delta_lagrangian: Option<f64>,
    pub lorentz_norm: Option<f64>,
    pub tol: f64,
    pub min_orbits: usize,
    pub max_orbit_action: Option<f64>,
    pub max_orbit_diameter: Option<f64>,
    pub indices: Option<Vec<usize>>,
}

impl Default for ExpectConfig {
    fn default() -> Self {
        Self {
            c0: None,
            c1: None,
            delta0: None,
            delta_lagrangian: None,
            lorentz_norm: None,
            tol: 1e-9,
            min_orbits: 1,
            max_orbit_action: None,
            max_orbit_diameter: None,
            indices: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub loops: bool,
    pub poly: bool,
    pub trajectory: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, loops: true, poly: true, trajectory: true }
    }
}
