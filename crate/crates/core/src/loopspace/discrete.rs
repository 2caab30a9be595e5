use std::f64::consts::TAU;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TorusManifold;

/// Largest admissible cover-coordinate step between consecutive samples.
pub const MAX_STEP: f64 = 0.5;

/// Minimum number of samples per loop.
pub const MIN_SAMPLES: usize = 8;

/// `N` samples `x̃₀ … x̃_{N−1}` of a lifted loop in cover coordinates with
/// period `τ` and winding `α ∈ ℤⁿ`; the closure rule is `x̃_N = x̃₀ + α`.
///
/// Sample `j` sits at time `t_j = jτ/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoopRepr", into = "LoopRepr")]
pub struct DiscreteLoop {
    dim: usize,
    data: Vec<f64>,
    winding: Vec<i64>,
    tau: f64,
}

#[derive(Serialize, Deserialize)]
struct LoopRepr {
    tau: f64,
    winding: Vec<i64>,
    samples: Vec<Vec<f64>>,
}

impl TryFrom<LoopRepr> for DiscreteLoop {
    type Error = Error;
    fn try_from(r: LoopRepr) -> Result<Self> {
        DiscreteLoop::from_points(&r.samples, r.winding, r.tau)
    }
}

impl From<DiscreteLoop> for LoopRepr {
    fn from(l: DiscreteLoop) -> Self {
        LoopRepr { tau: l.tau, samples: l.points().map(|p| p.to_vec()).collect(), winding: l.winding }
    }
}

impl DiscreteLoop {
    /// Builds a loop from flat sample data (`N·n` values, sample-major).
    pub fn new(dim: usize, data: Vec<f64>, winding: Vec<i64>, tau: f64) -> Result<Self> {
        if dim == 0 || winding.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: winding.len() });
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidLoop("sample data length is not a multiple of the dimension".into()));
        }
        if data.len() / dim < MIN_SAMPLES {
            return Err(Error::InvalidLoop(format!("need at least {MIN_SAMPLES} samples")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidLoop("period must be positive".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLoop("non-finite sample".into()));
        }
        Ok(Self { dim, data, winding, tau })
    }

    pub fn from_points(points: &[Vec<f64>], winding: Vec<i64>, tau: f64) -> Result<Self> {
        let dim = winding.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: points.first().map_or(0, |p| p.len()) });
        }
        Self::new(dim, points.concat(), winding, tau)
    }

    /// Parametrized loop `t ↦ f(t)` sampled at `t_j = jτ/N`; `f` must satisfy `f(τ) = f(0) + α`.
    pub fn from_fn(dim: usize, winding: Vec<i64>, tau: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let data = (0..n).flat_map(|j| f(j as f64 * tau / n as f64)).collect();
        Self::new(dim, data, winding, tau)
    }

    pub fn constant(x0: &[f64], tau: f64, n: usize) -> Result<Self> {
        let d = x0.len();
        Self::from_fn(d, vec![0; d], tau, n, |_| x0.to_vec())
    }

    /// Straight-line representative `t ↦ x₀ + tα/τ` of the class `α`.
    pub fn straight(x0: &[f64], winding: Vec<i64>, tau: f64, n: usize) -> Result<Self> {
        let w = winding.clone();
        Self::from_fn(x0.len(), winding, tau, n, move |t| {
            x0.iter().zip(&w).map(|(x, a)| x + *a as f64 * t / tau).collect()
        })
    }

    /// Circle of radius `r` in the `(i, j)` coordinate plane traversed `turns`
    /// times; `turns > 0` is counter-clockwise.
    pub fn circle(center: &[f64], axes: (usize, usize), radius: f64, turns: i64, tau: f64, n: usize) -> Result<Self> {
        let d = center.len();
        Self::from_fn(d, vec![0; d], tau, n, |t| {
            let a = TAU * turns as f64 * t / tau;
            let mut p = center.to_vec();
            p[axes.0] += radius * a.cos();
            p[axes.1] += radius * a.sin();
            p
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn winding(&self) -> &[i64] {
        &self.winding
    }

    /// Time step `h = τ/N`.
    pub fn step(&self) -> f64 {
        self.tau / self.len() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.step()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Sample at an arbitrary integer index using the closure rule
    /// `x̃_{j+N} = x̃_j + α`.
    pub fn extended(&self, j: isize) -> Vec<f64> {
        let n = self.len() as isize;
        let r = j.rem_euclid(n);
        let wraps = j.div_euclid(n);
        self.point(r as usize)
            .iter()
            .zip(&self.winding)
            .map(|(x, a)| x + (wraps * *a as isize) as f64)
            .collect()
    }

    /// A loop with the same winding and period but new sample data.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, data, self.winding.clone(), self.tau)
    }

    /// Segment `j` as (start, end) with end `x̃_{j+1}`.
    pub fn segment(&self, j: usize) -> (Vec<f64>, Vec<f64>) {
        (self.point(j).to_vec(), self.extended(j as isize + 1))
    }

    /// Largest cover-coordinate step between consecutive samples.
    pub fn max_step(&self) -> f64 {
        (0..self.len())
            .map(|j| {
                let (a, b) = self.segment(j);
                a.iter().zip(&b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Subdivides every segment at its midpoint (`2N` samples).
    pub fn refined(&self) -> Self {
        let mut data = Vec::with_capacity(2 * self.data.len());
        for j in 0..self.len() {
            let (a, b) = self.segment(j);
            data.extend_from_slice(&a);
            data.extend(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)));
        }
        Self { data, ..self.clone() }
    }

    /// Refines until the resolution guard `max step ≤ 0.5` holds.
    pub fn ensure_resolution(&self) -> std::borrow::Cow<'_, Self> {
        if self.max_step() <= MAX_STEP {
            return std::borrow::Cow::Borrowed(self);
        }
        let mut l = self.refined();
        while l.max_step() > MAX_STEP {
            l = l.refined();
        }
        std::borrow::Cow::Owned(l)
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(x, s)| x + s))
            .collect();
        Self { data, ..self.clone() }
    }

    /// Time shift by `s` samples: `y_j = x̃_{j+s}`.
    pub fn time_shifted(&self, s: isize) -> Self {
        let data = (0..self.len() as isize).flat_map(|j| self.extended(j + s)).collect();
        Self { data, ..self.clone() }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (mi, x) in m.iter_mut().zip(p) {
                *mi += x / n;
            }
        }
        m
    }

    /// Largest Euclidean distance between two samples (cover coordinates).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for a in self.points() {
            for b in self.points() {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                best = best.max(d);
            }
        }
        best.sqrt()
    }

    /// Segment velocity `v_j = (x̃_{j+1} − x̃_j)/h`.
    pub fn segment_velocity(&self, j: usize) -> DVector<f64> {
        let (a, b) = self.segment(j);
        let h = self.step();
        DVector::from_iterator(self.dim, a.iter().zip(&b).map(|(x, y)| (y - x) / h))
    }

    /// Centered velocity estimate at sample `j`.
    pub fn node_velocity(&self, j: usize) -> DVector<f64> {
        let a = self.extended(j as isize - 1);
        let b = self.extended(j as isize + 1);
        let h = self.step();
        DVector::from_iterator(self.dim, a.iter().zip(&b).map(|(x, y)| (y - x) / (2.0 * h)))
    }

    /// Riemannian length `ℓ(q) = ∫|q̇|_g dt` of the polygon.
    pub fn length(&self, m: &TorusManifold) -> f64 {
        (0..self.len())
            .map(|j| {
                let (a, b) = self.segment(j);
                m.segment_length(&a, &b)
            })
            .sum()
    }

    /// `‖q̇‖²_{L²}` in coordinate norm, `Σ h |v_j|²`.
    pub fn kinetic_l2(&self) -> f64 {
        let h = self.step();
        (0..self.len()).map(|j| h * self.segment_velocity(j).norm_squared()).sum()
    }

    /// Discrete `L²` distance `(Σ h |x_j − y_j|²)^{1/2}`.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        if self.data.len() != other.data.len() {
            return f64::INFINITY;
        }
        let h = self.step();
        (self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * h).sqrt()
    }
}

/// Loop in `T*𝕋ⁿ`: a base loop with momenta at the samples (`p_N = p₀`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotangentLoop {
    pub base: DiscreteLoop,
    momenta: Vec<f64>,
}

impl CotangentLoop {
    pub fn new(base: DiscreteLoop, momenta: Vec<f64>) -> Result<Self> {
        if momenta.len() != base.data.len() {
            return Err(Error::InvalidLoop("momenta length does not match the base loop".into()));
        }
        if momenta.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidLoop("non-finite momentum".into()));
        }
        Ok(Self { base, momenta })
    }

    pub fn momentum(&self, j: usize) -> &[f64] {
        let n = self.base.dim;
        let j = j % self.base.len();
        &self.momenta[j * n..(j + 1) * n]
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }
}

/// Shape of the seeded random loop family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomLoopSpec {
    pub samples: usize,
    pub modes: usize,
    pub amplitude: f64,
}

impl Default for RandomLoopSpec {
    fn default() -> Self {
        Self { samples: 64, modes: 3, amplitude: 0.2 }
    }
}

/// Random smooth loop in class `α`: the straight line from a uniform base
/// point in `[0,1)ⁿ` plus a truncated Fourier series with coefficients
/// uniform in `[−A, A]`.
pub fn random_loop(rng: &mut impl Rng, winding: &[i64], tau: f64, spec: RandomLoopSpec) -> Result<DiscreteLoop> {
    let dim = winding.len();
    let x0: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let a = spec.amplitude;
    let coeffs: Vec<(f64, f64)> = (0..spec.modes * dim)
        .map(|_| (rng.gen_range(-a..=a), rng.gen_range(-a..=a)))
        .collect();
    let l = DiscreteLoop::from_fn(dim, winding.to_vec(), tau, spec.samples, |t| {
        (0..dim)
            .map(|i| {
                let mut x = x0[i] + winding[i] as f64 * t / tau;
                for k in 1..=spec.modes {
                    let (c, s) = coeffs[(k - 1) * dim + i];
                    let ang = TAU * k as f64 * t / tau;
                    x += c * ang.cos() + s * ang.sin();
                }
                x
            })
            .collect()
    })?;
    Ok(l.ensure_resolution().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_rule_reconstructs_winding() {
        let l = DiscreteLoop::straight(&[0.2, 0.1, 0.7], vec![0, 0, 3], 0.5, 16).unwrap();
        let end = l.extended(16);
        let diff: Vec<f64> = end.iter().zip(l.point(0)).map(|(a, b)| a - b).collect();
        assert_eq!(diff, vec![0.0, 0.0, 3.0]);
        assert_eq!(l.extended(-1)[2], l.point(15)[2] - 3.0);
    }

    #[test]
    fn rejects_bad_loops() {
        assert!(DiscreteLoop::constant(&[0.0, 0.0], 1.0, 4).is_err());
        assert!(DiscreteLoop::constant(&[0.0, 0.0], 0.0, 16).is_err());
        assert!(DiscreteLoop::new(2, vec![0.0; 17], vec![0, 0], 1.0).is_err());
    }

    #[test]
    fn refinement_restores_resolution_guard() {
        let l = DiscreteLoop::straight(&[0.0, 0.0], vec![7, 0], 1.0, 8).unwrap();
        assert!(l.max_step() > MAX_STEP);
        let r = l.ensure_resolution();
        assert!(r.max_step() <= MAX_STEP);
        assert_eq!(r.len(), 16);
        assert_eq!(r.extended(16), vec![7.0, 0.0]);
    }

    #[test]
    fn time_shift_keeps_class() {
        let l = DiscreteLoop::straight(&[0.0, 0.0], vec![1, 0], 1.0, 8).unwrap();
        let s = l.time_shifted(3);
        assert_eq!(s.point(0), &[3.0 / 8.0, 0.0]);
        assert_eq!(s.point(7), &[10.0 / 8.0, 0.0]);
    }

    #[test]
    fn random_loops_are_seeded() {
        use rand::SeedableRng;
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spec = RandomLoopSpec::default();
        let la = random_loop(&mut a, &[0, 0, 1], 1.0, spec).unwrap();
        let lb = random_loop(&mut b, &[0, 0, 1], 1.0, spec).unwrap();
        assert_eq!(la, lb);
        assert_eq!(la.winding(), &[0, 0, 1]);
    }
}
