//! Scenario files: a TOML schema, semantic validation and the runners that
//! turn a configuration into a report directory.
//!
//! Schema violations carry the dotted path of the offending key, so a
//! front end can point at it. Semantic problems that do not prevent a run
//! (a class that is not σ-atoroidal, `|δ|τ` above a threshold) are reported
//! as warnings.

mod config;
mod run;

use std::path::Path;

use nalgebra::DMatrix;

pub use config::*;
pub use run::{
    run_scenario, Assertion, FlowSection, IndexRow, IndexSweepSection, IsoperimetricSection, OrbitEntry, OrbitsSection,
    Report, RunOutcome, Setup,
};

use crate::constants::constants_report;
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::geometry::{MagneticForm, MagneticSystem, PlanarTerm, TorusManifold};
use crate::lagrangian::LagrangianSystem;
use crate::loopspace::{atoroidal_test, ATOROIDAL_RESOLUTION, MIN_SAMPLES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;

/// Command-line overrides applied on top of a config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.solver.rng_seed = seed;
        }
        if let Some(n) = self.resolution {
            cfg.solver.samples = n;
            cfg.index_sweep.resolutions = vec![n];
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |k| before.len() - k - 1) + 1;
    (line, col)
}

/// Parses a scenario from TOML text.
///
/// Errors are `Error::Config` with the key path and, when known, the line and column.
///
/// ```
/// use magflow_core::scenario::parse_config;
/// let err = parse_config("[manifold]\ndim = 2\n[solver]\nseedz = 3\n").unwrap_err();
/// assert!(err.to_string().contains("solver.seedz"));
/// ```
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = match inner.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}: {}", inner.message())
            }
            None => inner.message().to_string(),
        };
        Error::Config { path: if path == "." { "<root>".into() } else { path }, message }
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn bad(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn check_modes(path: &str, series: &[crate::fourier::CosineTerm], dim: usize) -> Result<()> {
    for (k, t) in series.iter().enumerate() {
        if t.wavevector.len() != dim {
            return Err(bad(format!("{path}[{k}].wavevector"), format!("expected {dim} entries, got {}", t.wavevector.len())));
        }
        if !(t.amplitude.is_finite() && t.omega.is_finite() && t.phase.is_finite()) {
            return Err(bad(format!("{path}[{k}]"), "non-finite coefficient"));
        }
    }
    Ok(())
}

fn positive(path: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive and finite, got {x}")))
    }
}

/// A validated scenario with its geometric objects built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub manifold: TorusManifold,
    pub lagrangian: LagrangianSystem,
    pub magnetic: MagneticSystem,
    pub winding: Vec<i64>,
    pub warnings: Vec<String>,
    pub notices: Vec<String>,
}

impl Scenario {
    pub fn tau(&self) -> f64 {
        self.config.system.tau
    }

    pub fn metric_name(&self) -> String {
        self.manifold.name()
    }

    pub fn sigma_name(&self) -> String {
        let c = &self.config.sigma;
        if let Some(name) = &c.name {
            return name.clone();
        }
        if c.terms.is_empty() {
            return "zero".into();
        }
        c.terms
            .iter()
            .map(|t| {
                let coef = if t.modulation == 0.0 {
                    format!("{}", t.strength)
                } else {
                    format!("({} + {} cos 2πq{})", t.strength, t.modulation, t.i)
                };
                format!("{coef} dq{}^dq{}", t.i, t.j)
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn atoroidal(&self) -> bool {
        self.magnetic.delta == 0.0
            || self.magnetic.form.is_zero()
            || atoroidal_test(&self.magnetic.form, &self.winding, ATOROIDAL_RESOLUTION)
    }
}

fn sigma_terms(c: &SigmaConfig, dim: usize) -> Result<Vec<SigmaTerm>> {
    match (&c.name, c.terms.is_empty()) {
        (Some(name), true) => match name.as_str() {
            "zero" => Ok(Vec::new()),
            "area" if dim >= 2 => Ok(vec![SigmaTerm { i: 1, j: 2, strength: 1.0, modulation: 0.0 }]),
            "area" => Err(bad("sigma.name", "the area form needs dim ≥ 2")),
            other => Err(bad("sigma.name", format!("unknown built-in form `{other}` (expected `area` or `zero`)"))),
        },
        _ => Ok(c.terms.clone()),
    }
}

fn build_manifold(c: &ManifoldConfig) -> Result<TorusManifold> {
    let n = c.dim;
    let gram = match &c.gram {
        None => DMatrix::identity(n, n),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(bad("manifold.gram", format!("expected a {n}×{n} matrix")));
            }
            let g = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            if (0..n).any(|i| (0..n).any(|j| (g[(i, j)] - g[(j, i)]).abs() > 1e-12 || !g[(i, j)].is_finite())) {
                return Err(bad("manifold.gram", "must be symmetric and finite"));
            }
            g
        }
    };
    let built = match c.metric {
        MetricName::Flat => {
            if !c.factor.is_empty() {
                return Err(bad("manifold.factor", "a conformal factor needs metric = \"conformal\""));
            }
            TorusManifold::flat(gram)
        }
        MetricName::Conformal => {
            check_modes("manifold.factor", &c.factor, n)?;
            TorusManifold::conformal(gram, FourierSeries { terms: c.factor.clone() })
        }
    };
    built.map_err(|e| bad("manifold.gram", e.to_string()))
}

/// Builds the geometric objects and runs all semantic checks.
pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario> {
    let n = config.manifold.dim;
    if !(1..=8).contains(&n) {
        return Err(bad("manifold.dim", format!("must be between 1 and 8, got {n}")));
    }
    let manifold = build_manifold(&config.manifold)?;

    let terms = sigma_terms(&config.sigma, n)?;
    let mut planar = Vec::with_capacity(terms.len());
    for (k, t) in terms.iter().enumerate() {
        for (key, idx) in [("i", t.i), ("j", t.j)] {
            if idx == 0 || idx > n {
                return Err(bad(format!("sigma.terms[{k}].{key}"), format!("index {idx} outside 1..={n}")));
            }
        }
        if t.i == t.j {
            return Err(bad(format!("sigma.terms[{k}].j"), "a planar term needs i ≠ j"));
        }
        planar.push(PlanarTerm { i: t.i - 1, j: t.j - 1, strength: t.strength, modulation: t.modulation });
    }
    let mut form = MagneticForm::new(n, planar).map_err(|e| bad("sigma.terms", e.to_string()))?;
    if config.sigma.primitive == PrimitiveChoice::None {
        form = form.without_primitive();
    }
    if !config.sigma.delta.is_finite() {
        return Err(bad("sigma.delta", "must be finite"));
    }
    let magnetic = MagneticSystem::new(form, config.sigma.delta);

    let sys = &config.system;
    positive("system.tau", sys.tau)?;
    check_modes("system.potential", &sys.potential, n)?;
    let potential = sys.potential_series();
    let lagrangian = match sys.family {
        Family::Kinetic => {
            if sys.softening != 0.0 {
                return Err(bad("system.softening", "only used with family = \"softened\""));
            }
            LagrangianSystem::kinetic(manifold.clone(), potential)
        }
        Family::Softened => {
            if !(sys.softening >= 0.0 && sys.softening.is_finite()) {
                return Err(bad("system.softening", "must be non-negative"));
            }
            LagrangianSystem::Softened { manifold: manifold.clone(), potential, softening: sys.softening }
        }
    };

    let mut notices = Vec::new();
    let winding = if config.class.winding.is_empty() {
        notices.push(format!("class.winding is empty; using α = {:?}", vec![0; n]));
        vec![0; n]
    } else if config.class.winding.len() != n {
        return Err(bad("class.winding", format!("expected {n} entries, got {}", config.class.winding.len())));
    } else {
        config.class.winding.clone()
    };

    let p = &config.solver;
    if p.samples < MIN_SAMPLES {
        return Err(bad("solver.samples", format!("must be at least {MIN_SAMPLES}")));
    }
    if p.seeds == 0 {
        return Err(bad("solver.seeds", "must be at least 1"));
    }
    positive("solver.step", p.step)?;
    positive("solver.grad_tol", p.grad_tol)?;
    positive("solver.newton_switch_tol", p.newton_switch_tol)?;
    positive("solver.tol_null", p.tol_null)?;
    if !(p.amplitude >= 0.0 && p.amplitude.is_finite()) {
        return Err(bad("solver.amplitude", "must be non-negative"));
    }
    positive("crosscheck.dt", config.crosscheck.dt)?;
    positive("crosscheck.closure_tol", config.crosscheck.closure_tol)?;

    let f = &config.flow;
    for (key, v) in [("flow.q0", &f.q0), ("flow.p0", &f.p0)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(bad(key, format!("expected {n} entries, got {}", v.len())));
            }
        }
    }
    positive("flow.dt", f.dt)?;
    if let Some(t) = f.t_end {
        positive("flow.t_end", t)?;
    }
    if f.record_every == 0 {
        return Err(bad("flow.record_every", "must be at least 1"));
    }

    let sw = &config.index_sweep;
    if let Some((k, _)) = sw.resolutions.iter().enumerate().find(|(_, r)| **r < MIN_SAMPLES) {
        return Err(bad(format!("index_sweep.resolutions[{k}]"), format!("must be at least {MIN_SAMPLES}")));
    }
    if let Some(b) = &sw.base_point {
        if b.len() != n {
            return Err(bad("index_sweep.base_point", format!("expected {n} entries, got {}", b.len())));
        }
    }
    if let Some(ix) = &config.expect.indices {
        if ix.len() != sw.deltas.len() {
            return Err(bad("expect.indices", format!("expected one index per delta ({})", sw.deltas.len())));
        }
    }

    let mut scenario =
        Scenario { config, manifold, lagrangian, magnetic, winding, warnings: Vec::new(), notices };
    if !scenario.atoroidal() {
        scenario.warnings.push("class not σ-atoroidal; action_sigma unavailable".into());
    } else if scenario.config.system.family == Family::Kinetic && scenario.magnetic.form.has_primitive() {
        let rep = constants_report(
            &scenario.manifold,
            scenario.lagrangian.potential(),
            &scenario.magnetic,
            &scenario.winding,
            scenario.tau(),
        )?;
        if rep.delta_tau > rep.delta0 {
            scenario.warnings.push(format!(
                "|δ|τ = {} exceeds the compactness threshold δ₀ = {}; the run proceeds since the bound is sufficient, not necessary",
                run::num(rep.delta_tau),
                run::num(rep.delta0)
            ));
        }
        if rep.delta_tau > rep.delta_lagrangian {
            scenario.warnings.push(format!(
                "|δ|τ = {} exceeds the coercivity threshold δ(L,σ,g) = {}",
                run::num(rep.delta_tau),
                run::num(rep.delta_lagrangian)
            ));
        }
    }
    Ok(scenario)
}

/// Parses, overrides and validates in one step.
pub fn prepare(text: &str, overrides: Overrides) -> Result<Scenario> {
    let mut cfg = parse_config(text)?;
    overrides.apply(&mut cfg);
    build_scenario(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const T2: &str = "scenario = \"constants\"\n[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 1.0\n";

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let s = prepare(T2, Overrides::default()).unwrap();
        assert_eq!(s.config.solver, crate::variational::SolverParams::default());
        assert_eq!(s.winding, vec![0, 0]);
        assert_eq!(s.notices.len(), 1);
        assert_eq!(s.sigma_name(), "area");
    }

    #[test]
    fn unknown_keys_are_pointed_at() {
        let e = parse_config("[manifold]\ndim = 2\n[solver]\nmax_iter = 3\n").unwrap_err();
        assert_eq!(path_of(e), "solver.max_iter");
        let e = parse_config("[manifold]\ndim = 2\n[sigma]\ndelta = \"big\"\n").unwrap_err();
        assert!(e.to_string().contains("sigma.delta") && e.to_string().contains("line 4"), "{e}");
        let e = parse_config("[manifold\ndim = 2\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn semantic_errors_are_pointed_at() {
        let e = prepare("[manifold]\ndim = 3\n[[sigma.terms]]\ni = 1\nj = 4\nstrength = 1.0\n", Overrides::default());
        assert_eq!(path_of(e.unwrap_err()), "sigma.terms[0].j");
        let e = prepare("[manifold]\ndim = 2\n[class]\nwinding = [1]\n", Overrides::default());
        assert_eq!(path_of(e.unwrap_err()), "class.winding");
        let e = prepare("[manifold]\ndim = 2\n[system]\ntau = -1.0\n", Overrides::default());
        assert_eq!(path_of(e.unwrap_err()), "system.tau");
        let e = prepare("[manifold]\ndim = 2\ngram = [[1.0, 2.0], [2.0, 1.0]]\n", Overrides::default());
        assert_eq!(path_of(e.unwrap_err()), "manifold.gram");
    }

    #[test]
    fn warnings_for_toroidal_class_and_large_delta_tau() {
        let s = prepare(
            "[manifold]\ndim = 3\n[sigma]\ndelta = 1.0\n[[sigma.terms]]\ni = 1\nj = 2\nstrength = 1.0\n[class]\nwinding = [1, 0, 0]\n",
            Overrides::default(),
        )
        .unwrap();
        assert_eq!(s.warnings, vec!["class not σ-atoroidal; action_sigma unavailable".to_string()]);
        let s = prepare(&format!("{T2}[system]\ntau = 0.5\n"), Overrides::default()).unwrap();
        assert!(s.warnings.iter().any(|w| w.contains("δ₀")), "{:?}", s.warnings);
        let s = prepare(&format!("{T2}[system]\ntau = 0.05\n"), Overrides::default()).unwrap();
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn overrides_replace_seed_and_resolution() {
        let s = prepare(T2, Overrides { seed: Some(9), resolution: Some(128) }).unwrap();
        assert_eq!(s.config.solver.rng_seed, 9);
        assert_eq!(s.config.solver.samples, 128);
        assert_eq!(s.config.index_sweep.resolutions, vec![128]);
    }
}
