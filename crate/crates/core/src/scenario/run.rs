use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{
    check_coercivity, check_isoperimetric, check_palais_smale, constants_report, delta_lagrangian,
    growth_constants_kinetic, isoperimetric_constants, ConstantsReport, InequalityCheck, IsoperimetricConstants,
    PalaisSmaleCheck, ReferenceLoop,
};
use crate::error::Result;
use crate::geometry::{MagneticSystem, SampleGrid};
use crate::hamiltonian::{fenchel_dual, integrate, trajectory_csv, CrosscheckReport, Hamiltonian, Trajectory};
use crate::loopspace::io::{fmt_f64, loop_poly, write_loop};
use crate::loopspace::{el_residual, DiscreteLoop};
use crate::variational::{crosscheck_record, morse_index, multi_start_survey, SeedRun};

use super::{Family, Scenario, ScenarioKind, EXIT_ASSERTION, EXIT_OK};

/// One named, machine-readable check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Setup {
    pub dim: usize,
    pub metric: String,
    pub sigma: String,
    pub delta: f64,
    pub family: Family,
    pub tau: f64,
    pub winding: Vec<i64>,
    pub rng_seed: u64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitEntry {
    pub action: f64,
    pub el_residual: f64,
    pub grad_norm: f64,
    pub morse_index: usize,
    pub nullity: usize,
    pub nondegenerate: bool,
    pub flow_closure_residual: Option<f64>,
    pub resolution: usize,
    pub seed: Option<u64>,
    pub diameter: f64,
    /// Loop CSV relative to the output directory.
    pub file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitsSection {
    pub records: Vec<OrbitEntry>,
    pub crosschecks: Vec<CrosscheckReport>,
    pub runs: Vec<SeedRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoperimetricSection {
    pub constants: IsoperimetricConstants,
    pub isoperimetric: InequalityCheck,
    pub coercivity: Option<InequalityCheck>,
    pub palais_smale: Option<PalaisSmaleCheck>,
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSection {
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub final_state: Vec<f64>,
    pub return_residual: f64,
    pub energy_drift: f64,
    pub file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexRow {
    pub delta: f64,
    pub resolution: usize,
    pub index: usize,
    pub nullity: usize,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexSweepSection {
    pub base_point: Vec<f64>,
    pub el_residual: f64,
    pub rows: Vec<IndexRow>,
}

/// The `report.json` document. No timings are stored, so identical inputs give identical bytes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: ScenarioKind,
    pub setup: Setup,
    pub notices: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isoperimetric: Option<IsoperimetricSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbits: Option<OrbitsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_sweep: Option<IndexSweepSection>,
    pub errors: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

impl Report {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail });
    }

    fn fail(&mut self, section: &str, err: crate::Error) {
        self.errors.push(format!("{section}: {err}"));
        self.check(&format!("{section}.completed"), false, err.to_string());
    }

    pub fn failed(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub exit_code: i32,
}

/// Short human-readable number: plain for moderate magnitudes, scientific otherwise.
pub(crate) fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-3..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn close(got: f64, want: f64, tol: f64) -> (bool, String) {
    let ok = if want.is_infinite() { got == want } else { (got - want).abs() <= tol };
    (ok, format!("got {}, expected {} ± {}", num(got), num(want), num(tol)))
}

/// Runs `kind` (or the config's own scenario) and writes `report.json` and
/// data files below `out`.
pub fn run_scenario(sc: &Scenario, kind: Option<ScenarioKind>, out: &Path) -> Result<RunOutcome> {
    let kind = kind.unwrap_or(sc.config.scenario);
    fs::create_dir_all(out)?;
    let cfg = &sc.config;
    let mut report = Report {
        scenario: kind,
        setup: Setup {
            dim: sc.manifold.dim(),
            metric: sc.metric_name(),
            sigma: sc.sigma_name(),
            delta: sc.magnetic.delta,
            family: cfg.system.family,
            tau: sc.tau(),
            winding: sc.winding.clone(),
            rng_seed: cfg.solver.rng_seed,
            samples: cfg.solver.samples,
        },
        notices: sc.notices.clone(),
        warnings: sc.warnings.clone(),
        constants: None,
        isoperimetric: None,
        orbits: None,
        flow: None,
        index_sweep: None,
        errors: Vec::new(),
        assertions: Vec::new(),
        passed: false,
    };
    let full = kind == ScenarioKind::FullReport;
    if kind == ScenarioKind::Constants || full {
        constants_section(sc, &mut report, full);
    }
    if kind == ScenarioKind::Isoperimetric || full {
        isoperimetric_section(sc, &mut report);
    }
    if kind == ScenarioKind::Orbits || full {
        orbits_section(sc, &mut report, out);
    }
    if kind == ScenarioKind::Flow {
        flow_section(sc, &mut report, out);
    }
    if kind == ScenarioKind::IndexSweep {
        index_sweep_section(sc, &mut report);
    }
    report.passed = report.errors.is_empty() && report.assertions.iter().all(|a| a.passed);
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let exit_code = if report.passed { EXIT_OK } else { EXIT_ASSERTION };
    Ok(RunOutcome { report, exit_code })
}

fn constants_section(sc: &Scenario, report: &mut Report, optional: bool) {
    if sc.config.system.family != Family::Kinetic {
        if optional {
            report.notices.push("constants are computed for the kinetic family only; section skipped".into());
        } else {
            report.fail("constants", crate::Error::InvalidParameter("constants need family = \"kinetic\"".into()));
        }
        return;
    }
    if optional && !sc.atoroidal() {
        report.notices.push("class not σ-atoroidal; constants section skipped".into());
        return;
    }
    match constants_report(&sc.manifold, sc.lagrangian.potential(), &sc.magnetic, &sc.winding, sc.tau()) {
        Ok(rep) => {
            let e = &sc.config.expect;
            let golden = [
                ("constants.C0", rep.isoperimetric.c0, e.c0),
                ("constants.C1", rep.isoperimetric.c1, e.c1),
                ("constants.delta0", rep.delta0, e.delta0),
                ("constants.delta_lagrangian", rep.delta_lagrangian, e.delta_lagrangian),
                ("constants.lorentz_norm", rep.lorentz_norm, e.lorentz_norm),
            ];
            for (name, got, want) in golden {
                if let Some(want) = want {
                    let (ok, detail) = close(got, want, e.tol);
                    report.check(name, ok, detail);
                }
            }
            report.constants = Some(rep);
        }
        Err(err) => report.fail("constants", err),
    }
}

fn isoperimetric_section(sc: &Scenario, report: &mut Report) {
    let run = || -> Result<IsoperimetricSection> {
        let cfg = &sc.config;
        let spec = cfg.solver.random_spec();
        let seed = cfg.solver.rng_seed;
        let iso = isoperimetric_constants(&sc.manifold, &sc.magnetic.form, &sc.winding, &ReferenceLoop::Auto)?;
        let check = check_isoperimetric(
            &sc.manifold,
            &sc.magnetic.form,
            &iso,
            &sc.winding,
            cfg.isoperimetric.samples,
            seed,
            spec,
        )?;
        let mut section =
            IsoperimetricSection { constants: iso, isoperimetric: check, coercivity: None, palais_smale: None, skipped: Vec::new() };
        let wants_more = cfg.isoperimetric.coercivity || cfg.isoperimetric.palais_smale_runs > 0;
        if !wants_more {
            return Ok(section);
        }
        if cfg.system.family != Family::Kinetic {
            section.skipped.push("coercivity and Palais–Smale checks need the kinetic family".into());
            return Ok(section);
        }
        let gc = growth_constants_kinetic(&sc.manifold, sc.lagrangian.potential(), &sc.magnetic, SampleGrid::default())?;
        let dl = delta_lagrangian(gc.ell0, iso.c0);
        let dt = sc.magnetic.delta.abs() * sc.tau();
        if !(dt < dl) {
            section.skipped.push(format!("|δ|τ = {} is not below δ(L,σ,g) = {}; coercivity checks skipped", num(dt), num(dl)));
            return Ok(section);
        }
        if cfg.isoperimetric.coercivity {
            section.coercivity = Some(check_coercivity(
                &sc.lagrangian,
                &sc.magnetic,
                &iso,
                &gc,
                &sc.winding,
                sc.tau(),
                cfg.isoperimetric.samples,
                seed,
                spec,
            )?);
        }
        if cfg.isoperimetric.palais_smale_runs > 0 {
            section.palais_smale = Some(check_palais_smale(
                &sc.lagrangian,
                &sc.magnetic,
                &iso,
                &gc,
                &sc.winding,
                sc.tau(),
                cfg.isoperimetric.palais_smale_runs,
                &cfg.solver,
            )?);
        }
        Ok(section)
    };
    match run() {
        Ok(section) => {
            let c = &section.isoperimetric;
            report.check(
                "isoperimetric.violations",
                c.violations == 0,
                format!("{} of {} loops violate the bound; max ratio {}", c.violations, c.samples, num(c.max_ratio)),
            );
            if let Some(c) = &section.coercivity {
                report.check(
                    "coercivity.violations",
                    c.violations == 0,
                    format!("{} of {} loops violate the lower bound", c.violations, c.samples),
                );
            }
            if let Some(p) = &section.palais_smale {
                report.check(
                    "palais_smale.violations",
                    p.violations == 0,
                    format!("{} of {} iterates exceed the bound ({} of {} runs converged)", p.violations, p.iterates, p.converged, p.runs),
                );
            }
            report.isoperimetric = Some(section);
        }
        Err(err) => report.fail("isoperimetric", err),
    }
}

fn orbits_section(sc: &Scenario, report: &mut Report, out: &Path) {
    let cfg = &sc.config;
    let run = || -> Result<OrbitsSection> {
        let mut survey = multi_start_survey(&sc.lagrangian, &sc.magnetic, &sc.winding, sc.tau(), &cfg.solver)?;
        let checks: Vec<Result<CrosscheckReport>> = survey
            .records
            .par_iter_mut()
            .map(|rec| crosscheck_record(&sc.lagrangian, &sc.magnetic, rec, &cfg.solver, cfg.crosscheck))
            .collect();
        let crosschecks = checks.into_iter().collect::<Result<Vec<_>>>()?;
        let dir = out.join("orbits");
        if cfg.outputs.loops || cfg.outputs.poly {
            fs::create_dir_all(&dir)?;
        }
        let mut records = Vec::with_capacity(survey.records.len());
        for (k, rec) in survey.records.iter().enumerate() {
            let stem = format!("orbit_{k:03}");
            if cfg.outputs.loops {
                write_loop(&dir.join(format!("{stem}.csv")), &rec.loop_, &sc.metric_name(), &sc.sigma_name())?;
            }
            if cfg.outputs.poly {
                fs::write(dir.join(format!("{stem}.poly")), loop_poly(&rec.loop_))?;
            }
            records.push(OrbitEntry {
                action: rec.action,
                el_residual: rec.el_residual,
                grad_norm: rec.grad_norm,
                morse_index: rec.morse_index,
                nullity: rec.nullity,
                nondegenerate: rec.nondegenerate,
                flow_closure_residual: rec.flow_closure_residual,
                resolution: rec.resolution,
                seed: rec.seed,
                diameter: rec.loop_.diameter(),
                file: cfg.outputs.loops.then(|| format!("orbits/{stem}.csv")),
            });
        }
        Ok(OrbitsSection { records, crosschecks, runs: survey.runs })
    };
    match run() {
        Ok(section) => {
            let e = &cfg.expect;
            let n = section.records.len();
            report.check("orbits.count", n >= e.min_orbits, format!("{n} distinct orbits, at least {} expected", e.min_orbits));
            let worst = section.records.iter().map(|r| r.el_residual).fold(0.0, f64::max);
            report.check(
                "orbits.certified",
                section.records.iter().all(|r| r.el_residual < 1e-8 && r.grad_norm < cfg.solver.grad_tol),
                format!("largest EL residual {}", num(worst)),
            );
            let worst = section.crosschecks.iter().map(|c| c.closure_residual).fold(0.0, f64::max);
            report.check(
                "orbits.flow_closure",
                section.crosschecks.iter().all(|c| c.closes),
                format!("largest closure residual {}, tolerance {}", num(worst), num(cfg.crosscheck.closure_tol)),
            );
            if let Some(bound) = e.max_orbit_action {
                let worst = section.records.iter().map(|r| r.action.abs()).fold(0.0, f64::max);
                report.check("orbits.max_action", worst < bound, format!("largest |action| {}, bound {}", num(worst), num(bound)));
            }
            if let Some(bound) = e.max_orbit_diameter {
                let worst = section.records.iter().map(|r| r.diameter).fold(0.0, f64::max);
                report.check("orbits.max_diameter", worst < bound, format!("largest diameter {}, bound {}", num(worst), num(bound)));
            }
            report.orbits = Some(section);
        }
        Err(err) => report.fail("orbits", err),
    }
}

fn trajectory_poly(traj: &Trajectory) -> String {
    let n = traj.dim;
    let mut s = String::new();
    for (t, z) in traj.times.iter().zip(&traj.states) {
        s.push_str(&fmt_f64(*t));
        for x in z.iter().take(n) {
            let _ = write!(s, " {}", fmt_f64(*x));
        }
        s.push('\n');
    }
    s
}

fn flow_section(sc: &Scenario, report: &mut Report, out: &Path) {
    let cfg = &sc.config;
    let f = &cfg.flow;
    let n = sc.manifold.dim();
    let run = || -> Result<(FlowSection, Trajectory)> {
        let hm = fenchel_dual(&sc.lagrangian, SampleGrid::new(1))?;
        let q0 = f.q0.clone().unwrap_or_else(|| vec![0.0; n]);
        let p0 = f.p0.clone().unwrap_or_else(|| {
            let mut p = vec![0.0; n];
            p[0] = 1.0;
            p
        });
        let z0 = DVector::from_iterator(2 * n, q0.iter().chain(&p0).copied());
        let t_end = f.t_end.unwrap_or(sc.tau());
        let traj = integrate(&hm as &dyn Hamiltonian, &sc.magnetic, &z0, 0.0, t_end, f.dt, f.record_every)?;
        let end = traj.last().clone();
        let section = FlowSection {
            q0,
            p0,
            t_end,
            dt: f.dt,
            final_state: end.iter().copied().collect(),
            return_residual: (&end - &z0).amax(),
            energy_drift: traj.energy_drift,
            file: cfg.outputs.trajectory.then(|| "trajectory.csv".to_string()),
        };
        if cfg.outputs.trajectory {
            fs::write(out.join("trajectory.csv"), trajectory_csv(&traj))?;
        }
        if cfg.outputs.poly {
            fs::write(out.join("trajectory.poly"), trajectory_poly(&traj))?;
        }
        Ok((section, traj))
    };
    match run() {
        Ok((section, _)) => {
            report.check(
                "flow.energy_drift",
                section.energy_drift <= f.energy_tol,
                format!("drift {}, tolerance {}", num(section.energy_drift), num(f.energy_tol)),
            );
            if let Some(tol) = f.return_tol {
                report.check(
                    "flow.return",
                    section.return_residual < tol,
                    format!("phase-space residual {}, tolerance {}", num(section.return_residual), num(tol)),
                );
            }
            report.flow = Some(section);
        }
        Err(err) => report.fail("flow", err),
    }
}

fn index_sweep_section(sc: &Scenario, report: &mut Report) {
    let cfg = &sc.config;
    let sw = &cfg.index_sweep;
    let base = sw.base_point.clone().unwrap_or_else(|| vec![0.0; sc.manifold.dim()]);
    let run = || -> Result<IndexSweepSection> {
        let probe = DiscreteLoop::constant(&base, sc.tau(), cfg.solver.samples)?;
        let residual = el_residual(&sc.lagrangian, &sc.magnetic, &probe, &sc.manifold)?;
        let grid: Vec<(f64, usize)> =
            sw.deltas.iter().flat_map(|d| sw.resolutions.iter().map(move |r| (*d, *r))).collect();
        let rows = grid
            .par_iter()
            .map(|&(delta, n)| {
                let s = MagneticSystem::new(sc.magnetic.form.clone(), delta);
                let q = DiscreteLoop::constant(&base, sc.tau(), n)?;
                let m = morse_index(&sc.lagrangian, &s, &q, cfg.solver.tol_null)?;
                Ok(IndexRow { delta, resolution: n, index: m.index, nullity: m.nullity, threshold: m.threshold })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IndexSweepSection { base_point: base.clone(), el_residual: residual, rows })
    };
    match run() {
        Ok(section) => {
            report.check(
                "index_sweep.critical",
                section.el_residual < 1e-8,
                format!("EL residual of the constant loop {}", num(section.el_residual)),
            );
            let per_delta: Vec<Vec<usize>> = section
                .rows
                .chunks(sw.resolutions.len().max(1))
                .map(|c| c.iter().map(|r| r.index).collect())
                .collect();
            let stable = per_delta.iter().all(|ix| ix.windows(2).all(|w| w[0] == w[1]));
            report.check("index_sweep.resolution_stable", stable, format!("indices per delta {per_delta:?}"));
            if let Some(want) = &cfg.expect.indices {
                let got: Vec<usize> = per_delta.iter().map(|ix| ix.first().copied().unwrap_or(0)).collect();
                report.check("index_sweep.indices", &got == want, format!("got {got:?}, expected {want:?}"));
            }
            report.index_sweep = Some(section);
        }
        Err(err) => report.fail("index_sweep", err),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{prepare, Overrides};
    use super::*;

    #[test]
    fn constants_scenario_reports_goldens() {
        let text = "scenario = \"constants\"\n[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 1.0\n\
                    [expect]\nC0 = 2.7071067811865475\ndelta0 = 0.09234951562953232\nlorentz_norm = 1.0\n";
        let sc = prepare(text, Overrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_scenario(&sc, None, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0, "{:?}", outcome.report.failed());
        assert_eq!(outcome.report.assertions.len(), 3);
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn failing_expectation_gives_exit_one() {
        let text = "[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 1.0\n[expect]\nC0 = 3.0\n";
        let sc = prepare(text, Overrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_scenario(&sc, Some(ScenarioKind::Constants), dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 1);
        assert_eq!(outcome.report.failed()[0].name, "constants.C0");
    }

    #[test]
    fn index_sweep_brackets_two_pi() {
        let text = "scenario = \"index_sweep\"\n[manifold]\ndim = 2\n[sigma]\nname = \"area\"\n\
                    [index_sweep]\nresolutions = [32, 64]\n[expect]\nindices = [0, 0, 0, 2, 2]\n";
        let sc = prepare(text, Overrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_scenario(&sc, None, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0, "{:?}", outcome.report.failed());
        assert_eq!(outcome.report.index_sweep.unwrap().rows.len(), 10);
    }

    #[test]
    fn flow_scenario_writes_trajectory() {
        let text = "scenario = \"flow\"\n[manifold]\ndim = 2\n[sigma]\nname = \"area\"\ndelta = 2.0\n\
                    [flow]\nt_end = 3.141592653589793\ndt = 1e-3\nrecord_every = 100\nreturn_tol = 1e-9\n";
        let sc = prepare(text, Overrides::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_scenario(&sc, None, dir.path()).unwrap();
        assert_eq!(outcome.exit_code, 0, "{:?}", outcome.report.failed());
        let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert!(csv.starts_with("t,q1,q2,p1,p2\n"));
        let poly = fs::read_to_string(dir.path().join("trajectory.poly")).unwrap();
        assert_eq!(poly.lines().next().unwrap().split(' ').count(), 3);
    }
}
