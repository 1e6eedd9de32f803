use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::derive_seed;

use super::Manifold;

/// A point on a product manifold, one matrix per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub parts: Vec<Mat>,
}

/// A tangent vector on a product manifold, one matrix per factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent {
    pub parts: Vec<Mat>,
}

impl ProductPoint {
    pub fn new(parts: Vec<Mat>) -> Self {
        Self { parts }
    }

    pub fn pair(x: Mat, y: Mat) -> Self {
        Self { parts: vec![x, y] }
    }

    pub fn x(&self) -> &Mat {
        &self.parts[0]
    }

    pub fn y(&self) -> &Mat {
        &self.parts[1]
    }

    /// Ambient Frobenius norm over all factors.
    pub fn ambient_norm(&self) -> f64 {
        self.parts.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

impl ProductTangent {
    pub fn new(parts: Vec<Mat>) -> Self {
        Self { parts }
    }

    pub fn pair(x: Mat, y: Mat) -> Self {
        Self { parts: vec![x, y] }
    }

    pub fn x(&self) -> &Mat {
        &self.parts[0]
    }

    pub fn y(&self) -> &Mat {
        &self.parts[1]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            parts: self.parts.iter().map(|m| Mat::zeros(m.nrows(), m.ncols())).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            parts: self.parts.iter().map(|m| m * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            parts: self
                .parts
                .iter()
                .zip(&other.parts)
                .map(|(a, b)| a + b * s)
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|m| m.iter().all(|v| v.is_finite()))
    }

    pub fn ambient_norm(&self) -> f64 {
        self.parts.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }
}

impl Add for &ProductTangent {
    type Output = ProductTangent;
    fn add(self, rhs: Self) -> ProductTangent {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &ProductTangent {
    type Output = ProductTangent;
    fn sub(self, rhs: Self) -> ProductTangent {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &ProductTangent {
    type Output = ProductTangent;
    fn mul(self, rhs: f64) -> ProductTangent {
        self.scale(rhs)
    }
}

impl Neg for &ProductTangent {
    type Output = ProductTangent;
    fn neg(self) -> ProductTangent {
        self.scale(-1.0)
    }
}

/// Riemannian product of factor geometries. Every operation acts
/// componentwise; the metric is the sum of the factor metrics.
#[derive(Debug, Clone)]
pub struct ProductManifold {
    factors: Vec<Arc<dyn Manifold>>,
}

impl ProductManifold {
    pub fn new(factors: Vec<Arc<dyn Manifold>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::DimensionMismatch("product of zero manifolds".into()));
        }
        Ok(Self { factors })
    }

    pub fn pair(x: impl Manifold + 'static, y: impl Manifold + 'static) -> Self {
        Self {
            factors: vec![Arc::new(x), Arc::new(y)],
        }
    }

    pub fn factors(&self) -> &[Arc<dyn Manifold>] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &dyn Manifold {
        self.factors[i].as_ref()
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).sum()
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if n != self.factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "product has {} factors, got {n} components",
                self.factors.len()
            )));
        }
        Ok(())
    }

    fn zip_map(
        &self,
        p: &ProductPoint,
        parts: &[Mat],
        f: impl Fn(&dyn Manifold, &Mat, &Mat) -> Result<Mat>,
    ) -> Result<Vec<Mat>> {
        self.check_arity(p.parts.len())?;
        self.check_arity(parts.len())?;
        self.factors
            .iter()
            .zip(&p.parts)
            .zip(parts)
            .map(|((m, pi), ui)| f(m.as_ref(), pi, ui))
            .collect()
    }

    pub fn inner(&self, p: &ProductPoint, u: &ProductTangent, v: &ProductTangent) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, m)| m.inner(&p.parts[i], &u.parts[i], &v.parts[i]))
            .sum()
    }

    pub fn norm(&self, p: &ProductPoint, u: &ProductTangent) -> f64 {
        self.inner(p, u, u).max(0.0).sqrt()
    }

    /// Per-factor norms.
    pub fn factor_norms(&self, p: &ProductPoint, u: &ProductTangent) -> Vec<f64> {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, m)| m.norm(&p.parts[i], &u.parts[i]))
            .collect()
    }

    pub fn has_exp(&self) -> bool {
        self.factors.iter().all(|f| f.has_exp())
    }

    pub fn has_log(&self) -> bool {
        self.factors.iter().all(|f| f.has_log())
    }

    pub fn exp(&self, p: &ProductPoint, u: &ProductTangent) -> Result<ProductPoint> {
        Ok(ProductPoint::new(self.zip_map(p, &u.parts, |m, pi, ui| m.exp(pi, ui))?))
    }

    pub fn retract(&self, p: &ProductPoint, u: &ProductTangent) -> Result<ProductPoint> {
        Ok(ProductPoint::new(self.zip_map(p, &u.parts, |m, pi, ui| m.retract(pi, ui))?))
    }

    /// The update map used by solvers: the exponential map on factors that
    /// have one (unless `use_retraction`), the retraction elsewhere.
    pub fn step(&self, p: &ProductPoint, u: &ProductTangent, use_retraction: bool) -> Result<ProductPoint> {
        Ok(ProductPoint::new(self.zip_map(p, &u.parts, |m, pi, ui| {
            if m.has_exp() && !use_retraction {
                m.exp(pi, ui)
            } else {
                m.retract(pi, ui)
            }
        })?))
    }

    /// Factorwise [`Manifold::fd_curve`].
    pub fn fd_curve(&self, p: &ProductPoint, u: &ProductTangent) -> Result<ProductPoint> {
        Ok(ProductPoint::new(self.zip_map(p, &u.parts, |m, pi, ui| m.fd_curve(pi, ui))?))
    }

    pub fn log(&self, p: &ProductPoint, q: &ProductPoint) -> Result<ProductTangent> {
        if let Some(f) = self.factors.iter().find(|f| !f.has_log()) {
            return Err(Error::LogUnavailable(f.name()));
        }
        Ok(ProductTangent::new(self.zip_map(p, &q.parts, |m, pi, qi| m.log(pi, qi))?))
    }

    pub fn dist(&self, p: &ProductPoint, q: &ProductPoint) -> Result<f64> {
        let v = self.log(p, q)?;
        Ok(self.norm(p, &v))
    }

    pub fn transport(&self, p: &ProductPoint, q: &ProductPoint, u: &ProductTangent) -> Result<ProductTangent> {
        self.check_arity(p.parts.len())?;
        self.check_arity(q.parts.len())?;
        self.check_arity(u.parts.len())?;
        let parts = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, m)| m.transport(&p.parts[i], &q.parts[i], &u.parts[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductTangent::new(parts))
    }

    pub fn project_tangent(&self, p: &ProductPoint, z: &ProductTangent) -> Result<ProductTangent> {
        Ok(ProductTangent::new(self.zip_map(p, &z.parts, |m, pi, zi| m.project_tangent(pi, zi))?))
    }

    pub fn egrad_to_rgrad(&self, p: &ProductPoint, g: &ProductTangent) -> Result<ProductTangent> {
        Ok(ProductTangent::new(self.zip_map(p, &g.parts, |m, pi, gi| m.egrad_to_rgrad(pi, gi))?))
    }

    pub fn random_point(&self, seed: u64) -> ProductPoint {
        ProductPoint::new(
            self.factors
                .iter()
                .enumerate()
                .map(|(i, m)| m.random_point(derive_seed(seed, i as u64)))
                .collect(),
        )
    }

    /// Random unit-norm tangent vector (norm taken in the product metric).
    pub fn random_tangent(&self, p: &ProductPoint, seed: u64) -> ProductTangent {
        let u = ProductTangent::new(
            self.factors
                .iter()
                .enumerate()
                .map(|(i, m)| m.random_tangent(&p.parts[i], derive_seed(seed, 1000 + i as u64)))
                .collect(),
        );
        let n = self.norm(p, &u);
        u.scale(1.0 / n)
    }

    pub fn zero_tangent(&self, p: &ProductPoint) -> ProductTangent {
        ProductTangent::new(
            self.factors
                .iter()
                .zip(&p.parts)
                .map(|(m, pi)| m.zero_tangent(pi))
                .collect(),
        )
    }

    /// Largest constraint violation over the factors.
    pub fn feasibility_residual(&self, p: &ProductPoint) -> f64 {
        self.factors
            .iter()
            .zip(&p.parts)
            .map(|(m, pi)| m.feasibility_residual(pi))
            .fold(0.0, f64::max)
    }

    pub fn tangency_residual(&self, p: &ProductPoint, u: &ProductTangent) -> f64 {
        self.factors
            .iter()
            .enumerate()
            .map(|(i, m)| m.tangency_residual(&p.parts[i], &u.parts[i]))
            .fold(0.0, f64::max)
    }
}
