use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{gaussian_matrix, seeded};

use super::{check_shape, Manifold, Tolerances};

const ZERO_STEP: f64 = 1e-12;
const ANTIPODAL_TOL: f64 = 1e-10;

/// Unit sphere `S^{d-1}` in `R^d` with the embedded Euclidean metric.
/// Points are `d x 1` column matrices.
#[derive(Debug, Clone)]
pub struct Sphere {
    d: usize,
    tol: Tolerances,
}

impl Sphere {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            tol: Tolerances::default(),
        }
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    fn check_point(&self, x: &Mat) -> Result<()> {
        check_shape("sphere point", x, (self.d, 1))?;
        check_unit(x, self.tol.point)
    }

    fn check_tangent(&self, x: &Mat, u: &Mat) -> Result<()> {
        check_shape("sphere tangent", u, (self.d, 1))?;
        check_tangent(x, u, self.tol.tangent)
    }
}

fn check_unit(x: &Mat, tol: f64) -> Result<()> {
    let err = (x.norm() - 1.0).abs();
    if !(err <= tol) {
        return Err(Error::NotOnManifold(format!("sphere: |‖x‖ - 1| = {err:e}")));
    }
    Ok(())
}

fn check_tangent(x: &Mat, u: &Mat, tol: f64) -> Result<()> {
    let err = x.dot(u).abs();
    if !(err <= tol * (1.0 + u.norm())) {
        return Err(Error::NotOnManifold(format!("sphere: xᵀu = {err:e}")));
    }
    Ok(())
}

fn project(x: &Mat, z: &Mat) -> Mat {
    z - x * x.dot(z)
}

fn exp_unchecked(x: &Mat, u: &Mat) -> Mat {
    let nu = u.norm();
    if nu < ZERO_STEP {
        return x.clone();
    }
    let y = x * nu.cos() + u * (nu.sin() / nu);
    let n = y.norm();
    y / n
}

fn log_unchecked(x: &Mat, y: &Mat) -> Result<Mat> {
    let c = x.dot(y).clamp(-1.0, 1.0);
    if c <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::AntipodalPoints);
    }
    let v = project(x, &(y - x));
    let nv = v.norm();
    if nv == 0.0 {
        return Ok(Mat::zeros(x.nrows(), 1));
    }
    let theta = nv.atan2(c);
    Ok(v * (theta / nv))
}

fn transport_unchecked(x: &Mat, y: &Mat, u: &Mat) -> Mat {
    let v = match log_unchecked(x, y) {
        Ok(v) => v,
        Err(_) => return project(y, u),
    };
    let theta = v.norm();
    if theta < ZERO_STEP {
        return u.clone();
    }
    let e = v / theta;
    let eu = e.dot(u);
    u + &e * ((theta.cos() - 1.0) * eu) - x * (theta.sin() * eu)
}

/// Exponential map along the great circle.
pub fn sphere_exp(x: &Mat, u: &Mat) -> Result<Mat> {
    let tol = Tolerances::default();
    check_unit(x, tol.point)?;
    check_tangent(x, u, tol.point)?;
    Ok(exp_unchecked(x, u))
}

pub fn sphere_log(x: &Mat, y: &Mat) -> Result<Mat> {
    let tol = Tolerances::default();
    check_unit(x, tol.point)?;
    check_unit(y, tol.point)?;
    log_unchecked(x, y)
}

/// Parallel transport of `u ∈ T_x` along the minimizing geodesic to `y`.
pub fn sphere_transport(x: &Mat, y: &Mat, u: &Mat) -> Mat {
    transport_unchecked(x, y, u)
}

impl Manifold for Sphere {
    fn name(&self) -> &'static str {
        "sphere"
    }

    fn dim(&self) -> usize {
        self.d - 1
    }

    fn shape(&self) -> (usize, usize) {
        (self.d, 1)
    }

    fn inner(&self, _p: &Mat, u: &Mat, v: &Mat) -> f64 {
        u.dot(v)
    }

    fn exp(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        self.check_point(p)?;
        self.check_tangent(p, u)?;
        Ok(exp_unchecked(p, u))
    }

    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        self.check_point(p)?;
        let y = p + u;
        let n = y.norm();
        Ok(y / n)
    }

    fn has_log(&self) -> bool {
        true
    }

    fn log(&self, p: &Mat, q: &Mat) -> Result<Mat> {
        self.check_point(p)?;
        self.check_point(q)?;
        log_unchecked(p, q)
    }

    fn transport(&self, p: &Mat, q: &Mat, u: &Mat) -> Result<Mat> {
        Ok(transport_unchecked(p, q, u))
    }

    fn project_tangent(&self, p: &Mat, z: &Mat) -> Result<Mat> {
        check_shape("sphere ambient", z, (self.d, 1))?;
        Ok(project(p, z))
    }

    fn egrad_to_rgrad(&self, p: &Mat, g: &Mat) -> Result<Mat> {
        self.project_tangent(p, g)
    }

    fn random_point(&self, seed: u64) -> Mat {
        let g = gaussian_matrix(self.d, 1, &mut seeded(seed));
        let n = g.norm();
        g / n
    }

    fn random_tangent(&self, p: &Mat, seed: u64) -> Mat {
        let u = project(p, &gaussian_matrix(self.d, 1, &mut seeded(seed)));
        let n = u.norm();
        u / n
    }

    fn feasibility_residual(&self, p: &Mat) -> f64 {
        (p.norm() - 1.0).abs()
    }

    fn tangency_residual(&self, p: &Mat, u: &Mat) -> f64 {
        p.dot(u).abs()
    }

    fn fd_pullback(&self, q: &Mat, p: &Mat, v: &Mat) -> Result<Mat> {
        Ok(transport_unchecked(q, p, v))
    }
}
