use crate::error::{Error, Result};
use crate::linalg::{sym, thin_qr, Mat};
use crate::rng::{gaussian_matrix, seeded};

use super::{check_shape, Manifold, Tolerances};

/// Stiefel manifold `St(d, r)` of `d x r` matrices with orthonormal columns,
/// embedded metric, QR retraction and projection-based vector transport.
#[derive(Debug, Clone)]
pub struct Stiefel {
    d: usize,
    r: usize,
    tol: Tolerances,
}

impl Stiefel {
    pub fn new(d: usize, r: usize) -> Self {
        assert!(r <= d, "Stiefel manifold needs r <= d");
        Self {
            d,
            r,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }
}

fn orthonormality_residual(x: &Mat) -> f64 {
    (x.transpose() * x - Mat::identity(x.ncols(), x.ncols())).norm()
}

fn project(x: &Mat, z: &Mat) -> Mat {
    z - x * sym(&(x.transpose() * z))
}

fn retract_unchecked(x: &Mat, u: &Mat) -> Result<Mat> {
    Ok(thin_qr(&(x + u))?.0)
}

/// `R_X(U) = qf(X + U)`.
pub fn stiefel_retract_qr(x: &Mat, u: &Mat) -> Result<Mat> {
    check_retract_pre(x, u, &Tolerances::default())?;
    retract_unchecked(x, u)
}

fn check_retract_pre(x: &Mat, u: &Mat, tol: &Tolerances) -> Result<()> {
    if x.shape() != u.shape() {
        return Err(Error::DimensionMismatch("stiefel point/tangent shapes differ".into()));
    }
    let orth = orthonormality_residual(x);
    if !(orth <= tol.point) {
        return Err(Error::NotOnManifold(format!("stiefel: ‖XᵀX - I‖ = {orth:e}")));
    }
    let skew = sym(&(x.transpose() * u)).norm();
    if !(skew <= tol.tangent * (1.0 + u.norm())) {
        return Err(Error::NotOnManifold(format!("stiefel: ‖sym(XᵀU)‖ = {skew:e}")));
    }
    Ok(())
}

impl Manifold for Stiefel {
    fn name(&self) -> &'static str {
        "stiefel"
    }

    fn dim(&self) -> usize {
        self.d * self.r - self.r * (self.r + 1) / 2
    }

    fn shape(&self) -> (usize, usize) {
        (self.d, self.r)
    }

    fn inner(&self, _p: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    fn has_exp(&self) -> bool {
        false
    }

    fn exp(&self, _p: &Mat, _u: &Mat) -> Result<Mat> {
        Err(Error::ExpUnavailable(self.name()))
    }

    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        check_retract_pre(p, u, &self.tol)?;
        retract_unchecked(p, u)
    }

    fn transport(&self, _p: &Mat, q: &Mat, u: &Mat) -> Result<Mat> {
        Ok(project(q, u))
    }

    fn project_tangent(&self, p: &Mat, z: &Mat) -> Result<Mat> {
        check_shape("stiefel ambient", z, self.shape())?;
        Ok(project(p, z))
    }

    fn egrad_to_rgrad(&self, p: &Mat, g: &Mat) -> Result<Mat> {
        self.project_tangent(p, g)
    }

    fn random_point(&self, seed: u64) -> Mat {
        thin_qr(&gaussian_matrix(self.d, self.r, &mut seeded(seed)))
            .expect("gaussian matrix has full column rank")
            .0
    }

    fn random_tangent(&self, p: &Mat, seed: u64) -> Mat {
        let u = project(p, &gaussian_matrix(self.d, self.r, &mut seeded(seed)));
        let n = u.norm();
        u / n
    }

    fn feasibility_residual(&self, p: &Mat) -> f64 {
        orthonormality_residual(p)
    }

    fn tangency_residual(&self, p: &Mat, u: &Mat) -> f64 {
        sym(&(p.transpose() * u)).norm()
    }
}
