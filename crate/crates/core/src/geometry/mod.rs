//! Tori with periodic metrics, magnetic forms and the Lorentz force.
//!
//! The Lorentz force `Y` of `(σ, g)` is the endomorphism with
//! `σ_q(u, v) = ⟨Y(q)u, v⟩_g`. With `σ(u, v) = uᵀΣv` this gives
//! `Y = −G⁻¹Σ`; the identity itself is what the tests pin down.

mod magnetic;
mod metric;

pub use magnetic::{GrowthClass, MagneticForm, MagneticSystem, PlanarTerm};
pub use metric::{MetricField, MetricKind, TorusManifold};
pub(crate) use metric::gauss_legendre_8;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

/// Nested uniform grid on the fundamental domain: `2^level` points per axis
/// at `k / 2^level`. Refining the level only adds points, so grid maxima are
/// monotone in the level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub level: u32,
}

impl SampleGrid {
    pub const fn new(level: u32) -> Self {
        Self { level }
    }

    pub fn per_axis(&self) -> usize {
        1usize << self.level
    }

    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let m = self.per_axis();
        let total = m.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..dim)
                    .map(|_| {
                        let k = idx % m;
                        idx /= m;
                        k as f64 / m as f64
                    })
                    .collect()
            })
            .collect()
    }
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self { level: 3 }
    }
}

fn check_dims(m: &TorusManifold, s: &MagneticForm) -> Result<()> {
    if m.dim() != s.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: s.dim() });
    }
    Ok(())
}

/// Lorentz force `Y(q)` of the form `σ` (without the `δ` multiplier).
pub fn lorentz_force(m: &TorusManifold, s: &MagneticForm, q: &[f64]) -> Result<DMatrix<f64>> {
    check_dims(m, s)?;
    let ginv = m.gram_inverse(q)?;
    Ok(-(ginv * s.sigma_matrix(q)))
}

/// Operator norm `sup{|Yv|_g : |v|_g = 1}` at one point.
pub fn lorentz_pointwise_norm(m: &TorusManifold, s: &MagneticForm, q: &[f64]) -> Result<f64> {
    let g = m.gram(q);
    let y = lorentz_force(m, s, q)?;
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MetricNotPositiveDefinite { q: q.to_vec() })?;
    let l = chol.l();
    // |Yv|²_g / |v|²_g as a Rayleigh quotient in the variables w = Lᵀv.
    let linv = l.clone().try_inverse().ok_or(Error::EigenFailed)?;
    let a = linv.clone() * y.transpose() * &g * &y * linv.transpose();
    let sym = (&a + a.transpose()) * 0.5;
    let top = symmetric_eigenvalues(&sym).last().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// `‖Y_{σ,g}‖_{L^∞_g}` estimated as the maximum over a sample grid.
pub fn lorentz_norm(m: &TorusManifold, s: &MagneticForm, grid: SampleGrid) -> Result<f64> {
    check_dims(m, s)?;
    let mut best = 0.0_f64;
    for q in grid.points(m.dim()) {
        best = best.max(lorentz_pointwise_norm(m, s, &q)?);
    }
    Ok(best)
}

/// Rescales the metric so that the Lorentz norm is at most one.
///
/// Returns `υ = max(1, ‖Y‖(1 + margin))` and the metric `υ·g`.
pub fn rescale_into_r_sigma(
    m: &TorusManifold,
    s: &MagneticForm,
    margin: f64,
    grid: SampleGrid,
) -> Result<(f64, TorusManifold)> {
    if margin < 0.0 {
        return Err(Error::InvalidParameter("margin must be non-negative".into()));
    }
    let norm = lorentz_norm(m, s, grid)?;
    let upsilon = (norm * (1.0 + margin)).max(1.0);
    Ok((upsilon, m.scaled(upsilon)?))
}

/// `ω_σ(a, b)` on `T*𝕋ⁿ` in coordinates `(q, p)`, with `ω_σ = dp∧dq + π*σ`.
pub fn omega_sigma(
    s: &MagneticForm,
    q: &[f64],
    a: (&DVector<f64>, &DVector<f64>),
    b: (&DVector<f64>, &DVector<f64>),
) -> f64 {
    let sig = s.sigma_matrix(q);
    a.1.dot(b.0) - a.0.dot(b.1) + a.0.dot(&(sig * b.0))
}

/// `ω_σ(J_g ξ, ξ) − ½ G_g(ξ, ξ)` for `ξ = (ξʰ, ξᵛ)`, where `J_g` maps
/// horizontal to vertical through the metric and `G_g = |ξʰ|²_g + |ξᵛ|²_{g*}`.
pub fn tameness_excess(
    m: &TorusManifold,
    s: &MagneticForm,
    q: &[f64],
    xi_h: &DVector<f64>,
    xi_v: &DVector<f64>,
) -> Result<f64> {
    let g = m.gram(q);
    let ginv = m.gram_inverse(q)?;
    let j_h = -(&ginv * xi_v);
    let j_v = &g * xi_h;
    let omega = omega_sigma(s, q, (&j_h, &j_v), (xi_h, xi_v));
    let gg = xi_h.dot(&(&g * xi_h)) + xi_v.dot(&(&ginv * xi_v));
    Ok(omega - 0.5 * gg)
}

/// Estimate of the linear-growth constant of the primitive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    /// Smallest `Θ` consistent with the sampled balls (a lower bound of the true constant).
    pub sampled: f64,
    /// Closed-form bound valid for all radii, when one is known.
    pub envelope: Option<f64>,
}

impl GrowthEstimate {
    /// The envelope when known, otherwise the sampled value.
    pub fn certified(&self) -> f64 {
        self.envelope.unwrap_or(self.sampled)
    }
}

/// Sampling of geodesic balls `B(z, r)` for `r ∈ {0, r_max/K, …, r_max}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSampling {
    pub radii: usize,
    pub per_axis: usize,
}

impl Default for BallSampling {
    fn default() -> Self {
        Self { radii: 16, per_axis: 8 }
    }
}

/// Growth constant `Θ_z` with `sup_{B(z,r)} |θ|_g ≤ Θ_z (r + 1)`.
pub fn primitive_growth_constant(
    m: &TorusManifold,
    s: &MagneticForm,
    z: &[f64],
    r_max: f64,
    sampling: BallSampling,
) -> Result<GrowthEstimate> {
    check_dims(m, s)?;
    if s.growth_class() == GrowthClass::None {
        return Err(Error::NoPrimitive);
    }
    if !(r_max >= 0.0) || sampling.per_axis < 2 {
        return Err(Error::InvalidParameter("bad ball sampling".into()));
    }
    let n = m.dim();
    // Maps unit-ball directions to displacements inside B(z, r)
    let (shape, shrink) = match m.kind() {
        MetricKind::Flat { gram } | MetricKind::Conformal { base: gram, .. } => {
            let l = gram.clone().cholesky().ok_or(Error::MetricNotPositiveDefinite { q: z.to_vec() })?.l();
            let shape = l.transpose().try_inverse().ok_or(Error::EigenFailed)?;
            let fmax = m.conformal_exponent_bounds().map_or(0.0, |b| b.1);
            (shape, (-fmax).exp())
        }
        MetricKind::General(_) => {
            let lmax = SampleGrid::new(3)
                .points(n)
                .iter()
                .map(|q| symmetric_eigenvalues(&m.gram(q)).last().copied().unwrap_or(1.0))
                .fold(0.0_f64, f64::max);
            (DMatrix::identity(n, n), 1.0 / lmax.sqrt())
        }
    };

    let k = sampling.per_axis;
    let mut dirs = Vec::new();
    let total = (k + 1).pow(n as u32);
    for mut idx in 0..total {
        let u: Vec<f64> = (0..n)
            .map(|_| {
                let c = idx % (k + 1);
                idx /= k + 1;
                -1.0 + 2.0 * c as f64 / k as f64
            })
            .collect();
        let r2: f64 = u.iter().map(|x| x * x).sum();
        if r2 <= 1.0 + 1e-12 {
            dirs.push(DVector::from_vec(u));
        }
    }

    let z_v = DVector::from_column_slice(z);
    let mut theta = 0.0_f64;
    for ri in 0..=sampling.radii {
        let r = if sampling.radii == 0 { r_max } else { r_max * ri as f64 / sampling.radii as f64 };
        let mut sup = 0.0_f64;
        for u in &dirs {
            let x = &z_v + &shape * u * (r * shrink);
            let th = s.primitive(x.as_slice());
            sup = sup.max(m.conorm(x.as_slice(), &th)?);
            if r == 0.0 {
                break;
            }
        }
        theta = theta.max(sup / (r + 1.0));
    }
    Ok(GrowthEstimate { sampled: theta, envelope: growth_envelope(m, s, z) })
}

/// Closed-form growth bound for flat and conformal metrics.
///
/// For a term `(b q_i + a sin(2πq_i)/2π) dq_j` and a point of `B_g(z, r)`:
/// `|q_i − z_i| ≤ s_i e^{−f_min} r` with `s_i = √(G₀⁻¹)_ii`, and
/// `|θ|_g ≤ e^{−f_min} √(G₀⁻¹)_jj |θ_j|`. Terms are summed.
fn growth_envelope(m: &TorusManifold, s: &MagneticForm, z: &[f64]) -> Option<f64> {
    let base = m.base_gram()?;
    let (fmin, _) = m.conformal_exponent_bounds()?;
    let binv = base.clone().try_inverse()?;
    let e = (-fmin).exp();
    let mut total = 0.0;
    for t in s.terms() {
        let si = binv[(t.i, t.i)].sqrt();
        let sj = binv[(t.j, t.j)].sqrt();
        let c = t.modulation.abs() / std::f64::consts::TAU;
        let b = t.strength.abs();
        total += sj * e * (b * z[t.i].abs() + c).max(b * si * e);
    }
    Some(total)
}

/// Diameter of the torus.
///
/// For a flat metric this is the covering radius of `ℤⁿ` under `G`: exact
/// (`½√tr G`) for diagonal `G`, otherwise sampled on a grid. For a conformal
/// metric the flat diameter of `G₀` is scaled by `e^{sup f}` (upper estimate).
pub fn diameter(m: &TorusManifold) -> Result<f64> {
    match m.kind() {
        MetricKind::Flat { gram } => Ok(flat_diameter(gram)),
        MetricKind::Conformal { base, .. } => {
            let (_, fmax) = m.conformal_exponent_bounds().expect("conformal bounds");
            Ok(fmax.exp() * flat_diameter(base))
        }
        MetricKind::General(_) => Err(Error::DiameterUnavailable),
    }
}

fn flat_diameter(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let off = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| g[(i, j)].abs())
        .fold(0.0, f64::max);
    if off == 0.0 {
        return 0.5 * g.trace().sqrt();
    }
    let level = match n {
        2 => 7,
        3 => 5,
        _ => 3,
    };
    let grid = SampleGrid::new(level);
    let m = grid.per_axis() as f64;
    let mut best = 0.0_f64;
    for mut x in grid.points(n) {
        // shift into [−½, ½)ⁿ and include the half-step offsets
        for xi in &mut x {
            *xi += 0.5 / m;
            if *xi >= 0.5 {
                *xi -= 1.0;
            }
        }
        best = best.max(distance_to_lattice(g, &x));
    }
    best
}

fn distance_to_lattice(g: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let span = 2i64;
    let width = (2 * span + 1) as usize;
    let mut best = f64::INFINITY;
    for mut idx in 0..width.pow(n as u32) {
        let d = DVector::from_iterator(
            n,
            x.iter().map(|&xi| {
                let k = (idx % width) as i64 - span;
                idx /= width;
                xi - xi.round() - k as f64
            }),
        );
        best = best.min(d.dot(&(g * &d)).sqrt());
    }
    best
}
