use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MagneticSystem;
use crate::hamiltonian::{crosscheck_orbit, CrosscheckOptions, CrosscheckReport};
use crate::lagrangian::LagrangianSystem;
use crate::loopspace::{atoroidal_test, random_loop, DiscreteLoop, ATOROIDAL_RESOLUTION};

use super::{descend_with_status, refine_newton, DescentStatus, OrbitRecord, SolverParams};

/// Outcome of one seed of a survey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub descent: DescentStatus,
    pub descent_iters: usize,
    pub certified: bool,
    pub action: Option<f64>,
    pub el_residual: Option<f64>,
    /// Index into `Survey::records` of the orbit this seed converged to.
    pub orbit: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Survey {
    pub records: Vec<OrbitRecord>,
    pub runs: Vec<SeedRun>,
}

/// Distance between two loops modulo integer time shifts and lattice
/// translations; with `continuous` the quotient is by all translations.
pub fn orbit_distance(a: &DiscreteLoop, b: &DiscreteLoop, continuous: bool) -> f64 {
    if a.len() != b.len() || a.winding() != b.winding() || a.dim() != b.dim() {
        return f64::INFINITY;
    }
    let n = a.dim();
    let h = a.step();
    let mut best = f64::INFINITY;
    for shift in 0..a.len() as isize {
        let bs = b.time_shifted(shift);
        let ma = a.mean();
        let mb = bs.mean();
        let offset: Vec<f64> = (0..n)
            .map(|i| {
                let d = ma[i] - mb[i];
                if continuous {
                    d
                } else {
                    d.round()
                }
            })
            .collect();
        let mut sum = 0.0;
        for (p, r) in a.points().zip(bs.points()) {
            for i in 0..n {
                let e = p[i] - r[i] - offset[i];
                sum += e * e;
            }
        }
        best = best.min((h * sum).sqrt());
    }
    best
}

/// One seed: random loop, descent to the Newton switch tolerance, Newton refinement.
fn run_seed(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    winding: &[i64],
    tau: f64,
    params: &SolverParams,
    seed: u64,
) -> (SeedRun, Option<OrbitRecord>) {
    let mut run = SeedRun {
        seed,
        descent: DescentStatus::MaxIters,
        descent_iters: 0,
        certified: false,
        action: None,
        el_residual: None,
        orbit: None,
        error: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    rng.set_stream(seed);
    let mut attempt = || -> Result<(DescentStatus, usize, OrbitRecord)> {
        let q0 = random_loop(&mut rng, winding, tau, params.random_spec())?;
        let d = descend_with_status(l, s, &q0, params, params.newton_switch_tol)?;
        let mut rec = refine_newton(l, s, &d.loop_, params)?;
        rec.seed = Some(seed);
        Ok((d.status, d.trace.len().saturating_sub(1), rec))
    };
    match attempt() {
        Ok((status, iters, rec)) => {
            run.descent = status;
            run.descent_iters = iters;
            run.action = Some(rec.action);
            run.el_residual = Some(rec.el_residual);
            run.certified = rec.certified(params.grad_tol);
            let keep = run.certified.then_some(rec);
            (run, keep)
        }
        Err(e) => {
            run.error = Some(e.to_string());
            (run, None)
        }
    }
}

/// Seeded multi-start search for critical loops in class `α` with period `τ`.
///
/// Seeds run in parallel on the current rayon pool; results are merged in
/// seed order so the output does not depend on the thread count.
pub fn multi_start_survey(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    winding: &[i64],
    tau: f64,
    params: &SolverParams,
) -> Result<Survey> {
    if winding.len() != l.manifold().dim() {
        return Err(Error::DimensionMismatch { expected: l.manifold().dim(), got: winding.len() });
    }
    if s.delta != 0.0 && !s.form.is_zero() && !atoroidal_test(&s.form, winding, ATOROIDAL_RESOLUTION) {
        return Err(Error::NotAtoroidal { winding: winding.to_vec() });
    }
    let results: Vec<(SeedRun, Option<OrbitRecord>)> = (0..params.seeds as u64)
        .into_par_iter()
        .map(|seed| run_seed(l, s, winding, tau, params, seed))
        .collect();
    let continuous = l.translation_invariant() && s.form.is_constant();
    let mut records: Vec<OrbitRecord> = Vec::new();
    let mut runs = Vec::with_capacity(results.len());
    for (mut run, rec) in results {
        if let Some(rec) = rec {
            let found = records.iter().position(|r| {
                (r.action - rec.action).abs() < params.dedup_action_tol
                    && orbit_distance(&r.loop_, &rec.loop_, continuous) < params.dedup_distance_tol
            });
            run.orbit = Some(found.unwrap_or_else(|| {
                records.push(rec);
                records.len() - 1
            }));
        }
        runs.push(run);
    }
    Ok(Survey { records, runs })
}

/// Runs the flow cross-check on a record and folds the verdict into it.
///
/// The loop is first doubled `opts.refine` times and re-converged, since the
/// Legendre lift of a discrete loop is only second-order accurate.
pub fn crosscheck_record(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    rec: &mut OrbitRecord,
    params: &SolverParams,
    opts: CrosscheckOptions,
) -> Result<CrosscheckReport> {
    let mut q = rec.loop_.clone();
    if opts.refine > 0 {
        for _ in 0..opts.refine {
            q = q.refined();
        }
        q = refine_newton(l, s, &q, params)?.loop_;
    }
    let report = crosscheck_orbit(l, s, &q, opts)?;
    rec.flow_closure_residual = Some(report.closure_residual);
    rec.nondegenerate = rec.nondegenerate && report.nondegenerate;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::FourierSeries;
    use crate::geometry::{MagneticForm, TorusManifold};

    #[test]
    fn free_geodesics_in_a_winding_class() {
        let l = LagrangianSystem::free(TorusManifold::standard(2));
        let s = MagneticSystem::new(MagneticForm::zero(2), 0.0);
        let params = SolverParams { seeds: 4, samples: 32, ..Default::default() };
        let survey = multi_start_survey(&l, &s, &[1, 0], 1.0, &params).unwrap();
        assert_eq!(survey.records.len(), 1);
        assert!((survey.records[0].action - 0.5).abs() < 1e-12);
        assert!(survey.runs.iter().all(|r| r.orbit == Some(0)));
    }

    #[test]
    fn survey_is_deterministic() {
        let l = LagrangianSystem::kinetic(TorusManifold::standard(2), FourierSeries::mode(0.4, vec![1, 1]));
        let s = MagneticSystem::new(MagneticForm::area(1.0), 1.0);
        let params = SolverParams { seeds: 3, samples: 32, ..Default::default() };
        let a = multi_start_survey(&l, &s, &[0, 0], 1.0, &params).unwrap();
        let b = multi_start_survey(&l, &s, &[0, 0], 1.0, &params).unwrap();
        assert_eq!(a, b);
        assert!(!a.records.is_empty());
    }

    #[test]
    fn distance_ignores_time_shift_and_lattice_translation() {
        let a = DiscreteLoop::circle(&[0.2, 0.3], (0, 1), 0.1, 1, 1.0, 16).unwrap();
        let b = a.time_shifted(5).translated(&[1.0, -2.0]);
        assert!(orbit_distance(&a, &b, false) < 1e-14);
        let c = a.translated(&[0.3, 0.0]);
        assert!(orbit_distance(&a, &c, false) > 0.1);
        assert!(orbit_distance(&a, &c, true) < 1e-14);
    }
}
