use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::linalg::spd_inverse;

/// A user-supplied `ℤⁿ`-periodic metric. Points passed in are already
/// reduced into `[0, 1)ⁿ`.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;
    fn gram(&self, q: &[f64]) -> DMatrix<f64>;
    /// `∂G/∂q_k` for `k = 0..n`.
    fn gram_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>>;
    /// `∂²G/∂q_k∂q_l`, indexed `[k][l]`.
    fn gram_second_derivatives(&self, q: &[f64]) -> Vec<Vec<DMatrix<f64>>>;
    fn name(&self) -> String {
        "general".to_string()
    }
}

#[derive(Clone)]
pub enum MetricKind {
    /// Constant Gram matrix.
    Flat { gram: DMatrix<f64> },
    /// `G(q) = e^{2f(q)} G₀`.
    Conformal { base: DMatrix<f64>, factor: FourierSeries },
    General(Arc<dyn MetricField>),
}

impl fmt::Debug for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Flat { gram } => f.debug_struct("Flat").field("gram", gram).finish(),
            MetricKind::Conformal { base, factor } => f
                .debug_struct("Conformal")
                .field("base", base)
                .field("factor", factor)
                .finish(),
            MetricKind::General(m) => write!(f, "General({})", m.name()),
        }
    }
}

/// The torus `ℝⁿ/ℤⁿ` with a periodic Riemannian metric. Points are always
/// given in universal-cover coordinates.
#[derive(Clone, Debug)]
pub struct TorusManifold {
    dim: usize,
    kind: MetricKind,
}

fn reduce(q: &[f64]) -> Vec<f64> {
    q.iter().map(|x| x - x.floor()).collect()
}

impl TorusManifold {
    /// Standard flat torus `ℝⁿ/ℤⁿ` with `G = I`.
    pub fn standard(dim: usize) -> Self {
        Self { dim, kind: MetricKind::Flat { gram: DMatrix::identity(dim, dim) } }
    }

    pub fn flat(gram: DMatrix<f64>) -> Result<Self> {
        let dim = check_base(&gram)?;
        Ok(Self { dim, kind: MetricKind::Flat { gram } })
    }

    pub fn conformal(base: DMatrix<f64>, factor: FourierSeries) -> Result<Self> {
        let dim = check_base(&base)?;
        if !factor.check_dim(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: factor.terms.first().map_or(0, |t| t.wavevector.len()),
            });
        }
        if factor.terms.iter().any(|t| t.omega != 0.0) {
            return Err(Error::InvalidParameter("conformal factor must be time independent".into()));
        }
        Ok(Self { dim, kind: MetricKind::Conformal { base, factor } })
    }

    pub fn general(field: Arc<dyn MetricField>) -> Result<Self> {
        let dim = field.dim();
        if dim < 2 {
            return Err(Error::InvalidParameter("torus dimension must be at least 2".into()));
        }
        Ok(Self { dim, kind: MetricKind::General(field) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, MetricKind::Flat { .. })
    }

    /// Short identifier written into loop sidecars.
    pub fn name(&self) -> String {
        match &self.kind {
            MetricKind::Flat { .. } => "flat".into(),
            MetricKind::Conformal { .. } => "conformal".into(),
            MetricKind::General(m) => m.name(),
        }
    }

    pub fn gram(&self, q: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            MetricKind::Flat { gram } => gram.clone(),
            MetricKind::Conformal { base, factor } => base * (2.0 * factor.value(0.0, q)).exp(),
            MetricKind::General(m) => m.gram(&reduce(q)),
        }
    }

    pub fn gram_inverse(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        spd_inverse(&self.gram(q), q)
    }

    pub fn gram_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>> {
        match &self.kind {
            MetricKind::Flat { .. } => vec![DMatrix::zeros(self.dim, self.dim); self.dim],
            MetricKind::Conformal { base, factor } => {
                let e = (2.0 * factor.value(0.0, q)).exp();
                let g = factor.gradient(0.0, q);
                (0..self.dim).map(|k| base * (2.0 * g[k] * e)).collect()
            }
            MetricKind::General(m) => m.gram_derivatives(&reduce(q)),
        }
    }

    pub fn gram_second_derivatives(&self, q: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        match &self.kind {
            MetricKind::Flat { .. } => {
                vec![vec![DMatrix::zeros(self.dim, self.dim); self.dim]; self.dim]
            }
            MetricKind::Conformal { base, factor } => {
                let e = (2.0 * factor.value(0.0, q)).exp();
                let g = factor.gradient(0.0, q);
                let h = factor.hessian(0.0, q);
                (0..self.dim)
                    .map(|k| {
                        (0..self.dim)
                            .map(|l| base * (e * (4.0 * g[k] * g[l] + 2.0 * h[(k, l)])))
                            .collect()
                    })
                    .collect()
            }
            MetricKind::General(m) => m.gram_second_derivatives(&reduce(q)),
        }
    }

    /// Riemannian norm of a tangent vector at `q`.
    pub fn norm(&self, q: &[f64], v: &DVector<f64>) -> f64 {
        v.dot(&(self.gram(q) * v)).max(0.0).sqrt()
    }

    /// Dual norm of a covector at `q`.
    pub fn conorm(&self, q: &[f64], p: &DVector<f64>) -> Result<f64> {
        Ok(p.dot(&(self.gram_inverse(q)? * p)).max(0.0).sqrt())
    }

    /// The metric `υ·G`.
    pub fn scaled(&self, upsilon: f64) -> Result<Self> {
        if !(upsilon > 0.0) {
            return Err(Error::InvalidParameter("metric scale must be positive".into()));
        }
        let kind = match &self.kind {
            MetricKind::Flat { gram } => MetricKind::Flat { gram: gram * upsilon },
            MetricKind::Conformal { base, factor } => {
                MetricKind::Conformal { base: base * upsilon, factor: factor.clone() }
            }
            MetricKind::General(m) => {
                MetricKind::General(Arc::new(ScaledMetric { inner: m.clone(), upsilon }))
            }
        };
        Ok(Self { dim: self.dim, kind })
    }

    /// Certified bounds `(inf f, sup f)` of the conformal exponent; `(0, 0)` for flat metrics.
    pub fn conformal_exponent_bounds(&self) -> Option<(f64, f64)> {
        match &self.kind {
            MetricKind::Flat { .. } => Some((0.0, 0.0)),
            MetricKind::Conformal { factor, .. } => Some((factor.inf_bound(), factor.sup_bound())),
            MetricKind::General(_) => None,
        }
    }

    /// The constant part `G₀` of a flat or conformal metric.
    pub fn base_gram(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            MetricKind::Flat { gram } => Some(gram),
            MetricKind::Conformal { base, .. } => Some(base),
            MetricKind::General(_) => None,
        }
    }

    /// Riemannian length of the straight segment from `a` to `b`
    /// (exact for flat metrics, 8-point Gauss–Legendre otherwise).
    pub fn segment_length(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = DVector::from_iterator(self.dim, a.iter().zip(b).map(|(x, y)| y - x));
        if self.is_flat() {
            return self.norm(a, &d);
        }
        gauss_legendre_8(|s| {
            let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
            self.norm(&p, &d)
        })
    }
}

struct ScaledMetric {
    inner: Arc<dyn MetricField>,
    upsilon: f64,
}

impl MetricField for ScaledMetric {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn gram(&self, q: &[f64]) -> DMatrix<f64> {
        self.inner.gram(q) * self.upsilon
    }
    fn gram_derivatives(&self, q: &[f64]) -> Vec<DMatrix<f64>> {
        self.inner.gram_derivatives(q).into_iter().map(|m| m * self.upsilon).collect()
    }
    fn gram_second_derivatives(&self, q: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        self.inner
            .gram_second_derivatives(q)
            .into_iter()
            .map(|row| row.into_iter().map(|m| m * self.upsilon).collect())
            .collect()
    }
    fn name(&self) -> String {
        format!("{}*{}", self.upsilon, self.inner.name())
    }
}

fn check_base(g: &DMatrix<f64>) -> Result<usize> {
    let n = g.nrows();
    if n != g.ncols() {
        return Err(Error::DimensionMismatch { expected: n, got: g.ncols() });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("torus dimension must be at least 2".into()));
    }
    if (g - g.transpose()).amax() > 1e-12 * (1.0 + g.amax()) {
        return Err(Error::InvalidParameter("Gram matrix must be symmetric".into()));
    }
    if g.clone().cholesky().is_none() {
        return Err(Error::MetricNotPositiveDefinite { q: vec![] });
    }
    Ok(n)
}

/// Integral of `f` over `[0, 1]` with the 8-point Gauss–Legendre rule.
pub(crate) fn gauss_legendre_8(f: impl Fn(f64) -> f64) -> f64 {
    const NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let mut s = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        s += w * (f(0.5 * (1.0 + x)) + f(0.5 * (1.0 - x)));
    }
    0.5 * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bumpy() -> TorusManifold {
        TorusManifold::conformal(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.5]),
            FourierSeries::mode(0.3, vec![1, 1]),
        )
        .unwrap()
    }

    #[test]
    fn conformal_derivatives_match_finite_differences() {
        let m = bumpy();
        let q = [0.13, 0.71];
        let d = m.gram_derivatives(&q);
        let dd = m.gram_second_derivatives(&q);
        let eps = 1e-6;
        for k in 0..2 {
            let mut qp = q;
            let mut qm = q;
            qp[k] += eps;
            qm[k] -= eps;
            let fd = (m.gram(&qp) - m.gram(&qm)) / (2.0 * eps);
            assert!((fd - &d[k]).amax() < 1e-7);
            for l in 0..2 {
                let fd2 = (&m.gram_derivatives(&qp)[l] - &m.gram_derivatives(&qm)[l]) / (2.0 * eps);
                assert!((fd2 - &dd[l][k]).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn periodic_and_positive_definite() {
        let m = bumpy();
        let a = m.gram(&[0.3, 0.4]);
        let b = m.gram(&[2.3, -3.6]);
        assert!((a - b).amax() < 1e-12);
        assert!(m.gram_inverse(&[0.9, 0.1]).is_ok());
    }

    #[test]
    fn rejects_indefinite_gram() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(TorusManifold::flat(g), Err(Error::MetricNotPositiveDefinite { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = gauss_legendre_8(|s| s.powi(7) - 3.0 * s * s);
        assert!((v - (0.125 - 1.0)).abs() < 1e-14);
    }
}
