//! Trace-log bilinear objective on SPD × SPD:
//! `f(X, Y) = tr(Log_X(X₀) Log_Y(Y₀))`.
//!
//! Gradients come from finite differences along geodesics; the objective has
//! no analytic Hessian.

use crate::error::{Error, Result};
use crate::linalg::{check_positive, sym_eig, Mat, SymMatrix};
use crate::manifolds::{random_spd_matrix, spd_exp, spd_log, ProductManifold, ProductPoint, ProductTangent, Spd};
use crate::rng::derive_seed;

use super::MinMaxProblem;

const GRAD_STEP: f64 = 1e-3;

pub fn tracelog_value(x0: &Mat, y0: &Mat, x: &Mat, y: &Mat) -> Result<f64> {
    let a = spd_log(x, x0)?;
    let b = spd_log(y, y0)?;
    Ok(a.dot(&b))
}

/// Orthonormal basis `X^{1/2} Eₖ X^{1/2}` of the tangent space at `X` under
/// the affine-invariant metric.
fn tangent_basis(x: &Mat) -> Result<Vec<Mat>> {
    let eig = sym_eig(&SymMatrix::new(x.clone())?)?;
    check_positive(&eig)?;
    let s = eig.apply(f64::sqrt);
    let d = x.nrows();
    let mut basis = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let mut e = Mat::zeros(d, d);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            basis.push(&s * e * &s);
        }
    }
    Ok(basis)
}

/// Riemannian gradient of `X ↦ tr(Log_X(anchor) W)` by the five-point
/// central stencil along `t ↦ Exp_X(t Bₖ)`.
fn fd_block_grad(x: &Mat, anchor: &Mat, w: &Mat) -> Result<Mat> {
    let h = GRAD_STEP;
    let g = |t: f64, b: &Mat| -> Result<f64> { Ok(spd_log(&spd_exp(x, &(b * t))?, anchor)?.dot(w)) };
    let mut grad = Mat::zeros(x.nrows(), x.ncols());
    for b in tangent_basis(x)? {
        let slope = (g(-2.0 * h, &b)? - 8.0 * g(-h, &b)? + 8.0 * g(h, &b)? - g(2.0 * h, &b)?) / (12.0 * h);
        grad += b * slope;
    }
    Ok(grad)
}

/// Value and Riemannian gradients `(f, grad_X f, grad_Y f)`.
pub fn tracelog_value_grad(x0: &Mat, y0: &Mat, x: &Mat, y: &Mat) -> Result<(f64, Mat, Mat)> {
    let a = spd_log(x, x0)?;
    let b = spd_log(y, y0)?;
    let gx = fd_block_grad(x, x0, &b)?;
    let gy = fd_block_grad(y, y0, &a)?;
    Ok((a.dot(&b), gx, gy))
}

#[derive(Debug, Clone)]
pub struct TraceLog {
    x0: Mat,
    y0: Mat,
    geometry: ProductManifold,
}

impl TraceLog {
    pub fn new(x0: Mat, y0: Mat) -> Result<Self> {
        let d = x0.nrows();
        if x0.shape() != (d, d) || y0.shape() != (d, d) {
            return Err(Error::DimensionMismatch("trace-log anchors must be square and equal-sized".into()));
        }
        for m in [&x0, &y0] {
            check_positive(&sym_eig(&SymMatrix::new(m.clone())?)?)?;
        }
        Ok(Self {
            x0,
            y0,
            geometry: ProductManifold::pair(Spd::new(d), Spd::new(d)),
        })
    }

    /// Anchors with spectra in `[mu0, mu1]`.
    pub fn random(d: usize, mu0: f64, mu1: f64, seed: u64) -> Result<Self> {
        Self::new(
            random_spd_matrix(d, mu0, mu1, derive_seed(seed, 0)),
            random_spd_matrix(d, mu0, mu1, derive_seed(seed, 1)),
        )
    }

    pub fn anchors(&self) -> (&Mat, &Mat) {
        (&self.x0, &self.y0)
    }
}

impl MinMaxProblem for TraceLog {
    fn name(&self) -> &str {
        "tracelog"
    }

    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }

    fn value(&self, p: &ProductPoint) -> Result<f64> {
        tracelog_value(&self.x0, &self.y0, p.x(), p.y())
    }

    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let (_, gx, gy) = tracelog_value_grad(&self.x0, &self.y0, p.x(), p.y())?;
        Ok(ProductTangent::pair(gx, gy))
    }
}
