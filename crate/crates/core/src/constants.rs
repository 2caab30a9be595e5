//! Explicit constants: the quadratic isoperimetric constants `C₀, C₁`, the
//! growth constants of kinetic systems, and the field-strength thresholds
//! `δ₀` and `δ(L, σ, g)`. Also empirical checks of the inequalities these
//! constants enter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::geometry::{
    diameter, lorentz_norm, primitive_growth_constant, BallSampling, GrowthClass, MagneticForm, MagneticSystem,
    MetricKind, SampleGrid, TorusManifold,
};
use crate::hamiltonian::{magnetic_vector_field, HamiltonianSystem};
use crate::lagrangian::LagrangianSystem;
use crate::linalg::{symmetric_eigenvalues, symmetric_spectral_norm};
use crate::loopspace::{action_sigma, action_total, atoroidal_test, random_loop, DiscreteLoop, RandomLoopSpec, ATOROIDAL_RESOLUTION};
use crate::variational::{descend_with_status, DescentStatus, SolverParams};

/// Largest radius used when sampling the growth of the primitive.
pub const GROWTH_RADIUS: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricConstants {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub d: f64,
    #[serde(rename = "Theta")]
    pub theta: f64,
    pub ell_alpha: f64,
}

impl IsoperimetricConstants {
    /// `C₀ = (2 + d)Θ` and `C₁ = Θ(d+1)d + Θ(d+1) + Θ(d+ℓ+1)d + Θ(ℓ+1)ℓ`.
    pub fn from_parts(d: f64, theta: f64, ell_alpha: f64) -> Self {
        let c0 = (2.0 + d) * theta;
        let c1 = theta * (d + 1.0) * d
            + theta * (d + 1.0)
            + theta * (d + ell_alpha + 1.0) * d
            + theta * (ell_alpha + 1.0) * ell_alpha;
        Self { c0, c1, d, theta, ell_alpha }
    }

    /// `C₀ ℓ² + C₁`.
    pub fn bound(&self, length: f64) -> f64 {
        self.c0 * length * length + self.c1
    }
}

/// Reference loop for the isoperimetric constants.
#[derive(Clone, Debug, Default)]
pub enum ReferenceLoop {
    /// Straight line from the origin in direction `α`.
    #[default]
    Auto,
    Custom(DiscreteLoop),
}

pub fn isoperimetric_constants(
    m: &TorusManifold,
    s: &MagneticForm,
    winding: &[i64],
    reference: &ReferenceLoop,
) -> Result<IsoperimetricConstants> {
    if s.growth_class() == GrowthClass::None {
        return Err(Error::NoPrimitive);
    }
    if winding.len() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: winding.len() });
    }
    if !atoroidal_test(s, winding, ATOROIDAL_RESOLUTION) {
        return Err(Error::NotAtoroidal { winding: winding.to_vec() });
    }
    let d = diameter(m)?;
    let (base, ell) = match reference {
        ReferenceLoop::Auto => {
            let origin = vec![0.0; m.dim()];
            let end: Vec<f64> = winding.iter().map(|a| *a as f64).collect();
            let ell = m.segment_length(&origin, &end);
            (origin, ell)
        }
        ReferenceLoop::Custom(q) => {
            if q.winding() != winding {
                return Err(Error::InvalidLoop("reference loop is in a different class".into()));
            }
            (q.point(0).to_vec(), q.length(m))
        }
    };
    let theta = if s.is_zero() {
        0.0
    } else {
        primitive_growth_constant(m, s, &base, GROWTH_RADIUS, BallSampling::default())?.certified()
    };
    Ok(IsoperimetricConstants::from_parts(d, theta, ell))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub eta1: f64,
    pub k1: f64,
    pub eta2: f64,
    pub k2: f64,
    pub h_sigma_g: f64,
    pub ell1: f64,
    pub ell2: f64,
    pub ell0: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// Constants of `H = ½|p|²_{g*} + V` and its Lagrangian `L = ½|v|²_g − V`.
///
/// `ℓ₁` is the smallest eigenvalue of the Gram matrix over the grid, so
/// `L ≥ ℓ₀|v|² − D` holds in coordinate norm with `ℓ₀ = ℓ₁/2`.
pub fn growth_constants_kinetic(
    m: &TorusManifold,
    v: &FourierSeries,
    s: &MagneticSystem,
    grid: SampleGrid,
) -> Result<GrowthConstants> {
    if !v.is_finite() || !v.check_dim(m.dim()) {
        return Err(Error::UnboundedPotential);
    }
    let n = m.dim();
    let points = grid.points(n);
    let vmax = v.sup_bound().max(0.0);
    let mut lmin = f64::INFINITY;
    let mut ell2 = v.hessian_bound();
    let mut y_max = 0.0_f64;
    let mut kmax = 0.0_f64;
    for q in &points {
        let g = m.gram(q);
        let ev = symmetric_eigenvalues(&g);
        lmin = lmin.min(ev[0]);
        ell2 = ell2.max(*ev.last().unwrap());
        let dg: f64 = m.gram_derivatives(q).iter().map(symmetric_spectral_norm).sum();
        let ddg: f64 = m
            .gram_second_derivatives(q)
            .iter()
            .flat_map(|row| row.iter().map(symmetric_spectral_norm))
            .sum();
        ell2 = ell2.max(dg).max(0.5 * ddg + v.hessian_bound());
        y_max = y_max.max(crate::geometry::lorentz_pointwise_norm(m, &s.form, q)?);
        kmax = kmax.max(*symmetric_eigenvalues(&m.gram_inverse(q)?).last().unwrap());
    }
    if !(lmin > 0.0) {
        return Err(Error::MetricNotPositiveDefinite { q: vec![] });
    }
    let envelope = match m.kind() {
        MetricKind::Flat { .. } | MetricKind::Conformal { .. } => {
            let grad_f = match m.kind() {
                MetricKind::Conformal { factor, .. } => factor.gradient_bound(),
                _ => 0.0,
            };
            let co = kmax.sqrt();
            Some(0.5 * (1.0 + s.delta.abs() * y_max) + co * grad_f + co * v.gradient_bound())
        }
        MetricKind::General(_) => None,
    };
    let sampled = sample_field_growth(m, v, s, &points)?;
    Ok(GrowthConstants {
        eta1: 0.5,
        k1: vmax,
        eta2: 1.0,
        k2: 0.0,
        h_sigma_g: envelope.map_or(sampled, |e| e.max(sampled)),
        ell1: lmin,
        ell2,
        ell0: 0.5 * lmin,
        d: vmax,
    })
}

/// `sup |X_{H,δσ}|/(1 + |p|²)` over sampled momenta, in the norm
/// `(|q̇|²_g + |ṗ|²_{g*})^{1/2}`.
fn sample_field_growth(m: &TorusManifold, v: &FourierSeries, s: &MagneticSystem, points: &[Vec<f64>]) -> Result<f64> {
    let n = m.dim();
    let hm = HamiltonianSystem::kinetic(m.clone(), v.clone());
    let mut best = 0.0_f64;
    for q in points {
        for &r in &[0.0, 0.5, 1.0, 2.0, 10.0] {
            for dir in 0..(2 * n) {
                let mut z = nalgebra::DVector::zeros(2 * n);
                z.rows_mut(0, n).copy_from_slice(q);
                z[n + dir % n] = if dir < n { r } else { -r };
                let x = magnetic_vector_field(&hm, s, 0.0, &z)?;
                let qdot = x.rows(0, n).into_owned();
                let pdot = x.rows(n, n).into_owned();
                let p = z.rows(n, n).into_owned();
                let norm = (m.norm(q, &qdot).powi(2) + m.conorm(q, &pdot)?.powi(2)).sqrt();
                let p2 = m.conorm(q, &p)?.powi(2);
                best = best.max(norm / (1.0 + p2));
            }
        }
    }
    Ok(best)
}

/// `+∞` serialized as the string `"inf"`.
pub fn serialize_threshold<S: Serializer>(x: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        ser.serialize_str("inf")
    } else {
        ser.serialize_f64(*x)
    }
}

/// `δ₀ = η₁/(2C₀η₂)`, infinite for bounded primitives or `C₀ = 0`.
pub fn delta0(gc: &GrowthConstants, iso: &IsoperimetricConstants, class: GrowthClass) -> f64 {
    if class == GrowthClass::Bounded || iso.c0 == 0.0 {
        return f64::INFINITY;
    }
    gc.eta1 / (2.0 * iso.c0 * gc.eta2)
}

/// `δ(L, σ, g) = ℓ₀/C₀`, infinite for `C₀ = 0`.
pub fn delta_lagrangian(ell0: f64, c0: f64) -> f64 {
    if c0 == 0.0 {
        f64::INFINITY
    } else {
        ell0 / c0
    }
}

/// Result of testing an inequality on a batch of random loops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub samples: usize,
    pub violations: usize,
    /// Largest ratio of the left side to the right side.
    pub max_ratio: f64,
}

fn random_loops(winding: &[i64], tau: f64, samples: usize, seed: u64, spec: RandomLoopSpec) -> Result<Vec<DiscreteLoop>> {
    (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            random_loop(&mut rng, winding, tau, spec)
        })
        .collect()
}

/// `|𝒜_σ(q)| ≤ C₀ ℓ(q)² + C₁` on seeded random loops.
pub fn check_isoperimetric(
    m: &TorusManifold,
    s: &MagneticForm,
    iso: &IsoperimetricConstants,
    winding: &[i64],
    samples: usize,
    seed: u64,
    spec: RandomLoopSpec,
) -> Result<InequalityCheck> {
    let loops = random_loops(winding, 1.0, samples, seed, spec)?;
    let ratios: Vec<f64> = loops
        .par_iter()
        .map(|q| Ok(action_sigma(s, q)?.abs() / iso.bound(q.length(m)).max(f64::MIN_POSITIVE)))
        .collect::<Result<_>>()?;
    Ok(summarize(ratios, |r| r > 1.0))
}

fn summarize(ratios: Vec<f64>, bad: impl Fn(f64) -> bool) -> InequalityCheck {
    InequalityCheck {
        samples: ratios.len(),
        violations: ratios.iter().filter(|r| bad(**r)).count(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
    }
}

/// `𝒮_{L,δσ}(q) ≥ (ℓ₀ − |δ|C₀τ)‖q̇‖² − (|δ|C₁ + D)` on seeded random loops.
pub fn check_coercivity(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    iso: &IsoperimetricConstants,
    gc: &GrowthConstants,
    winding: &[i64],
    tau: f64,
    samples: usize,
    seed: u64,
    spec: RandomLoopSpec,
) -> Result<InequalityCheck> {
    let a = gc.ell0 - s.delta.abs() * iso.c0 * tau;
    let b = s.delta.abs() * iso.c1 + gc.d;
    let loops = random_loops(winding, tau, samples, seed, spec)?;
    let ratios: Vec<f64> = loops
        .par_iter()
        .map(|q| {
            let lower = a * q.kinetic_l2() - b;
            let act = action_total(l, s, q)?;
            // ratio > 1 means the lower bound exceeds the action
            Ok(if act >= lower { 0.0 } else { 1.0 + (lower - act) / (1.0 + act.abs()) })
        })
        .collect::<Result<_>>()?;
    Ok(summarize(ratios, |r| r > 1.0))
}

/// Palais–Smale proxy: along descent lines `‖q̇‖²` stays below
/// `(𝒮 + |δ|C₁ + D)/(ℓ₀ − |δ|C₀τ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PalaisSmaleCheck {
    pub runs: usize,
    pub converged: usize,
    pub iterates: usize,
    pub violations: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn check_palais_smale(
    l: &LagrangianSystem,
    s: &MagneticSystem,
    iso: &IsoperimetricConstants,
    gc: &GrowthConstants,
    winding: &[i64],
    tau: f64,
    runs: usize,
    params: &SolverParams,
) -> Result<PalaisSmaleCheck> {
    let a = gc.ell0 - s.delta.abs() * iso.c0 * tau;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter("|δ|τ is not below δ(L, σ, g)".into()));
    }
    let b = s.delta.abs() * iso.c1 + gc.d;
    let loops = random_loops(winding, tau, runs, params.rng_seed, params.random_spec())?;
    let per_run: Vec<(bool, usize, usize)> = loops
        .par_iter()
        .map(|q| {
            let d = descend_with_status(l, s, q, params, params.grad_tol)?;
            let bad = d.trace.iter().filter(|st| st.kinetic_l2 > (st.action + b) / a).count();
            Ok((d.status == DescentStatus::Converged, d.trace.len(), bad))
        })
        .collect::<Result<_>>()?;
    Ok(PalaisSmaleCheck {
        runs,
        converged: per_run.iter().filter(|r| r.0).count(),
        iterates: per_run.iter().map(|r| r.1).sum(),
        violations: per_run.iter().map(|r| r.2).sum(),
    })
}

/// Everything the constants scenario reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub lorentz_norm: f64,
    pub rescale_factor: f64,
    pub growth_class: GrowthClass,
    pub isoperimetric: IsoperimetricConstants,
    pub growth: GrowthConstants,
    #[serde(serialize_with = "serialize_threshold")]
    pub delta0: f64,
    #[serde(serialize_with = "serialize_threshold")]
    pub delta_lagrangian: f64,
    pub delta_tau: f64,
    pub notes: Vec<String>,
}

pub fn constants_report(
    m: &TorusManifold,
    v: &FourierSeries,
    s: &MagneticSystem,
    winding: &[i64],
    tau: f64,
) -> Result<ConstantsReport> {
    let grid = SampleGrid::default();
    let y = lorentz_norm(m, &s.form, grid)?;
    let iso = isoperimetric_constants(m, &s.form, winding, &ReferenceLoop::Auto)?;
    let gc = growth_constants_kinetic(m, v, s, grid)?;
    let class = s.form.growth_class();
    let d0 = delta0(&gc, &iso, class);
    let dl = delta_lagrangian(gc.ell0, iso.c0);
    let delta_tau = s.delta.abs() * tau;
    let mut notes = vec!["δ₀ is a sufficient threshold, not a sharp one".to_string()];
    if delta_tau >= d0 {
        notes.push(format!("|δ|τ = {delta_tau} exceeds δ₀ = {d0}; compactness estimates do not apply"));
    }
    if delta_tau >= dl {
        notes.push(format!("|δ|τ = {delta_tau} exceeds δ(L,σ,g) = {dl}; coercivity bound does not apply"));
    }
    Ok(ConstantsReport {
        lorentz_norm: y,
        rescale_factor: y.max(1.0),
        growth_class: class,
        isoperimetric: iso,
        growth: gc,
        delta0: d0,
        delta_lagrangian: dl,
        delta_tau,
        notes,
    })
}
