//! Geodesic quadratic-bilinear objective on SPD × SPD:
//! `f(X, Y) = c_q (logdet X)² + c_l logdet X logdet Y − c_q (logdet Y)²`.
//!
//! The saddle set is `{det X = det Y = 1}` and everything (gradient,
//! Hessian, Hamiltonian and its gradient) has a closed form.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, logdet_spd, Mat};
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent, Spd};
use crate::rng::seeded;

use super::MinMaxProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadBilinearParams {
    pub d: usize,
    pub c_q: f64,
    pub c_l: f64,
}

impl QuadBilinearParams {
    pub fn new(d: usize, c_q: f64, c_l: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("d must be positive".into()));
        }
        if !(c_q >= 0.0) || !(c_l >= 0.0) {
            return Err(Error::InvalidConfig("c_q and c_l must be nonnegative".into()));
        }
        if c_q == 0.0 && c_l == 0.0 {
            return Err(Error::InvalidConfig("c_q and c_l cannot both be zero".into()));
        }
        Ok(Self { d, c_q, c_l })
    }

    /// `4 c_q² + c_l²`.
    pub fn weight(&self) -> f64 {
        4.0 * self.c_q * self.c_q + self.c_l * self.c_l
    }

    /// PL constant `(4 c_q² + c_l²) d²` of the Hamiltonian.
    pub fn pl_constant(&self) -> f64 {
        self.weight() * (self.d * self.d) as f64
    }
}

pub fn qb_value(params: &QuadBilinearParams, x: &Mat, y: &Mat) -> Result<f64> {
    let lx = logdet_spd(x)?;
    let ly = logdet_spd(y)?;
    Ok(value_from_logdets(params.c_q, params.c_l, lx, ly))
}

fn value_from_logdets(c_q: f64, c_l: f64, lx: f64, ly: f64) -> f64 {
    c_q * lx * lx + c_l * lx * ly - c_q * ly * ly
}

fn grad_coefficients(c_q: f64, c_l: f64, lx: f64, ly: f64) -> (f64, f64) {
    (c_l * ly + 2.0 * c_q * lx, c_l * lx - 2.0 * c_q * ly)
}

/// `grad_X f = (c_l logdet Y + 2 c_q logdet X) X`,
/// `grad_Y f = (c_l logdet X − 2 c_q logdet Y) Y`.
pub fn qb_rgrad(params: &QuadBilinearParams, x: &Mat, y: &Mat) -> Result<(Mat, Mat)> {
    let lx = logdet_spd(x)?;
    let ly = logdet_spd(y)?;
    let (gx, gy) = grad_coefficients(params.c_q, params.c_l, lx, ly);
    Ok((x * gx, y * gy))
}

/// `grad ℋ = (4c_q² + c_l²) d (logdet X · X, logdet Y · Y)`.
pub fn qb_hamiltonian_grad_closed_form(params: &QuadBilinearParams, x: &Mat, y: &Mat) -> Result<(Mat, Mat)> {
    let lx = logdet_spd(x)?;
    let ly = logdet_spd(y)?;
    let k = params.weight() * params.d as f64;
    Ok((x * (k * lx), y * (k * ly)))
}

/// `ℋ = (4c_q² + c_l²) d / 2 · ((logdet X)² + (logdet Y)²)`.
pub fn qb_hamiltonian_closed_form(params: &QuadBilinearParams, x: &Mat, y: &Mat) -> Result<f64> {
    let lx = logdet_spd(x)?;
    let ly = logdet_spd(y)?;
    Ok(params.weight() * params.d as f64 / 2.0 * (lx * lx + ly * ly))
}

/// `|det X − 1| + |det Y − 1|`.
pub fn qb_opt_gap(x: &Mat, y: &Mat) -> Result<f64> {
    let lx = logdet_spd(x)?;
    let ly = logdet_spd(y)?;
    Ok((lx.exp() - 1.0).abs() + (ly.exp() - 1.0).abs())
}

// tr(X⁻¹ U) for the directional derivative of logdet.
fn trace_inv_mul(x: &Mat, u: &Mat) -> Result<f64> {
    let l = cholesky(x)?;
    Ok(cholesky_solve(&l, u).trace())
}

/// `Hess f[(U, V)]`. The field `X ↦ X` is parallel for the affine-invariant
/// connection, so only the scalar coefficients are differentiated.
fn hvp(c_q: f64, c_l: f64, x: &Mat, y: &Mat, u: &Mat, v: &Mat) -> Result<(Mat, Mat)> {
    let dx = trace_inv_mul(x, u)?;
    let dy = trace_inv_mul(y, v)?;
    Ok((x * (c_l * dy + 2.0 * c_q * dx), y * (c_l * dx - 2.0 * c_q * dy)))
}

fn spd_pair_geometry(d: usize, spectrum: (f64, f64)) -> ProductManifold {
    ProductManifold::pair(
        Spd::new(d).with_spectrum(spectrum.0, spectrum.1),
        Spd::new(d).with_spectrum(spectrum.0, spectrum.1),
    )
}

#[derive(Debug, Clone)]
pub struct QuadBilinear {
    params: QuadBilinearParams,
    geometry: ProductManifold,
}

impl QuadBilinear {
    pub fn new(params: QuadBilinearParams) -> Self {
        Self::with_spectrum(params, (0.5, 2.0))
    }

    /// Eigenvalue range of random starting points.
    pub fn with_spectrum(params: QuadBilinearParams, spectrum: (f64, f64)) -> Self {
        Self {
            params,
            geometry: spd_pair_geometry(params.d, spectrum),
        }
    }

    pub fn params(&self) -> &QuadBilinearParams {
        &self.params
    }
}

impl MinMaxProblem for QuadBilinear {
    fn name(&self) -> &str {
        "quad_bilinear"
    }

    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }

    fn value(&self, p: &ProductPoint) -> Result<f64> {
        qb_value(&self.params, p.x(), p.y())
    }

    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let (gx, gy) = qb_rgrad(&self.params, p.x(), p.y())?;
        Ok(ProductTangent::pair(gx, gy))
    }

    fn has_analytic_hvp(&self) -> bool {
        true
    }

    fn analytic_hvp(&self, p: &ProductPoint, u: &ProductTangent) -> Result<ProductTangent> {
        let (hx, hy) = hvp(self.params.c_q, self.params.c_l, p.x(), p.y(), u.x(), u.y())?;
        Ok(ProductTangent::pair(hx, hy))
    }

    fn opt_gap(&self, p: &ProductPoint) -> Option<f64> {
        qb_opt_gap(p.x(), p.y()).ok()
    }
}

/// Finite-sum variant: sample `i` is the quadratic-bilinear objective with
/// weights `c_q (1 + σᵢ)`, `c_l (1 + τᵢ)`; the perturbations are centered so
/// the sample-average weights are `(c_q, c_l)`.
#[derive(Debug, Clone)]
pub struct QbFiniteSum {
    params: QuadBilinearParams,
    weights: Vec<(f64, f64)>,
    geometry: ProductManifold,
}

impl QbFiniteSum {
    pub fn new(params: QuadBilinearParams, n_samples: usize, spread: f64, seed: u64) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::InvalidConfig("finite sum needs at least 2 samples".into()));
        }
        if !(spread >= 0.0) {
            return Err(Error::InvalidConfig("spread must be nonnegative".into()));
        }
        let mut rng = seeded(seed);
        let draw = |rng: &mut crate::rng::SeededRng| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n_samples)
                .map(|_| if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 })
                .collect();
            let mean = v.iter().sum::<f64>() / n_samples as f64;
            v.iter_mut().for_each(|s| *s -= mean);
            v
        };
        let sigma = draw(&mut rng);
        let tau = draw(&mut rng);
        let weights = sigma
            .iter()
            .zip(&tau)
            .map(|(s, t)| (params.c_q * (1.0 + s), params.c_l * (1.0 + t)))
            .collect();
        Ok(Self {
            params,
            weights,
            geometry: spd_pair_geometry(params.d, (0.5, 2.0)),
        })
    }

    pub fn params(&self) -> &QuadBilinearParams {
        &self.params
    }

    pub fn sample_weights(&self) -> &[(f64, f64)] {
        &self.weights
    }

    fn n(&self) -> f64 {
        self.weights.len() as f64
    }
}

impl MinMaxProblem for QbFiniteSum {
    fn name(&self) -> &str {
        "stochastic_qb"
    }

    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }

    fn value(&self, p: &ProductPoint) -> Result<f64> {
        let lx = logdet_spd(p.x())?;
        let ly = logdet_spd(p.y())?;
        let sum: f64 = self
            .weights
            .iter()
            .map(|&(cq, cl)| value_from_logdets(cq, cl, lx, ly))
            .sum();
        Ok(sum / self.n())
    }

    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let lx = logdet_spd(p.x())?;
        let ly = logdet_spd(p.y())?;
        let (mut ax, mut ay) = (0.0, 0.0);
        for &(cq, cl) in &self.weights {
            let (gx, gy) = grad_coefficients(cq, cl, lx, ly);
            ax += gx;
            ay += gy;
        }
        Ok(ProductTangent::pair(p.x() * (ax / self.n()), p.y() * (ay / self.n())))
    }

    fn has_analytic_hvp(&self) -> bool {
        true
    }

    fn analytic_hvp(&self, p: &ProductPoint, u: &ProductTangent) -> Result<ProductTangent> {
        let dx = trace_inv_mul(p.x(), u.x())?;
        let dy = trace_inv_mul(p.y(), u.y())?;
        let (mut ax, mut ay) = (0.0, 0.0);
        for &(cq, cl) in &self.weights {
            ax += cl * dy + 2.0 * cq * dx;
            ay += cl * dx - 2.0 * cq * dy;
        }
        Ok(ProductTangent::pair(p.x() * (ax / self.n()), p.y() * (ay / self.n())))
    }

    fn opt_gap(&self, p: &ProductPoint) -> Option<f64> {
        qb_opt_gap(p.x(), p.y()).ok()
    }

    fn sample_count(&self) -> Option<usize> {
        Some(self.weights.len())
    }

    fn sample_value(&self, i: usize, p: &ProductPoint) -> Result<f64> {
        let (cq, cl) = self.sample(i)?;
        let lx = logdet_spd(p.x())?;
        let ly = logdet_spd(p.y())?;
        Ok(value_from_logdets(cq, cl, lx, ly))
    }

    fn sample_rgrad(&self, i: usize, p: &ProductPoint) -> Result<ProductTangent> {
        let (cq, cl) = self.sample(i)?;
        let lx = logdet_spd(p.x())?;
        let ly = logdet_spd(p.y())?;
        let (gx, gy) = grad_coefficients(cq, cl, lx, ly);
        Ok(ProductTangent::pair(p.x() * gx, p.y() * gy))
    }

    fn sample_analytic_hvp(&self, i: usize, p: &ProductPoint, u: &ProductTangent) -> Result<ProductTangent> {
        let (cq, cl) = self.sample(i)?;
        let (hx, hy) = hvp(cq, cl, p.x(), p.y(), u.x(), u.y())?;
        Ok(ProductTangent::pair(hx, hy))
    }
}

impl QbFiniteSum {
    fn sample(&self, i: usize) -> Result<(f64, f64)> {
        self.weights
            .get(i)
            .copied()
            .ok_or_else(|| Error::DimensionMismatch(format!("sample index {i} out of range")))
    }
}
