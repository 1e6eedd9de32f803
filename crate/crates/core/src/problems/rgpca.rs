//! Robust geometry-aware PCA on SPD × Sphere:
//! `f(M, x) = xᵀMx + (α/n) Σᵢ dist²(M, Mᵢ)`.

use crate::error::{Error, Result};
use crate::linalg::{check_positive, matfn_from_eig, sym, sym_eig, Mat, MatFn, SymMatrix};
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent, Sphere, Spd};

use super::MinMaxProblem;

#[derive(Debug, Clone)]
pub struct RgpcaData {
    pub mats: Vec<Mat>,
    pub alpha: f64,
}

impl RgpcaData {
    pub fn new(mats: Vec<Mat>, alpha: f64) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidConfig("rgpca needs at least one matrix".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha = {alpha} must be nonnegative")));
        }
        let d = mats[0].nrows();
        for m in &mats {
            if m.shape() != (d, d) {
                return Err(Error::DimensionMismatch("rgpca matrices must share one square shape".into()));
            }
            check_positive(&sym_eig(&SymMatrix::new(m.clone())?)?)?;
        }
        Ok(Self { mats, alpha })
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }
}

/// Value and Riemannian gradients `(f, grad_M f, grad_x f)`.
pub fn rgpca_value_grad(data: &RgpcaData, m: &Mat, x: &Mat) -> Result<(f64, Mat, Mat)> {
    let d = data.dim();
    if m.shape() != (d, d) || x.shape() != (d, 1) {
        return Err(Error::DimensionMismatch(format!("rgpca expects {d}x{d} and {d}x1 inputs")));
    }
    let xn = x.norm();
    if !((xn - 1.0).abs() <= 1e-8) {
        return Err(Error::NotOnManifold(format!("rgpca: ‖x‖ = {xn}")));
    }
    let eig = sym_eig(&SymMatrix::new(m.clone())?)?;
    check_positive(&eig)?;
    let sqrt = eig.apply(f64::sqrt);
    let inv_sqrt = eig.apply(|l| 1.0 / l.sqrt());

    let n = data.mats.len() as f64;
    let mut dist_sq = 0.0;
    let mut log_sum = Mat::zeros(d, d);
    for mi in &data.mats {
        let inner = sym(&(&inv_sqrt * mi * &inv_sqrt));
        let l = matfn_from_eig(&sym_eig(&SymMatrix::new(inner)?)?, MatFn::Log)?.into_inner();
        dist_sq += l.norm_squared();
        log_sum += l;
    }
    let log_sum = sym(&(&sqrt * log_sum * &sqrt));

    let mx = m * x;
    let quad = x.dot(&mx);
    let value = quad + data.alpha / n * dist_sq;
    let grad_m = sym(&(&mx * mx.transpose())) - log_sum * (2.0 * data.alpha / n);
    let grad_x = (&mx - x * quad) * 2.0;
    Ok((value, grad_m, grad_x))
}

#[derive(Debug, Clone)]
pub struct Rgpca {
    data: RgpcaData,
    geometry: ProductManifold,
}

impl Rgpca {
    pub fn new(data: RgpcaData) -> Self {
        let d = data.dim();
        Self {
            data,
            geometry: ProductManifold::pair(Spd::new(d), Sphere::new(d)),
        }
    }

    pub fn data(&self) -> &RgpcaData {
        &self.data
    }
}

impl MinMaxProblem for Rgpca {
    fn name(&self) -> &str {
        "rgpca"
    }

    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }

    fn value(&self, p: &ProductPoint) -> Result<f64> {
        Ok(rgpca_value_grad(&self.data, p.x(), p.y())?.0)
    }

    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let (_, gm, gx) = rgpca_value_grad(&self.data, p.x(), p.y())?;
        Ok(ProductTangent::pair(gm, gx))
    }
}
