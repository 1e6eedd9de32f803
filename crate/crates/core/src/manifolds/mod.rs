//! Matrix manifolds and the geometry contract shared by problems and solvers.
//!
//! Every factor geometry works on points and tangent vectors stored as dense
//! matrices (vectors are `d x 1` matrices). [`ProductManifold`] stitches
//! factors together; min-max problems live on a two-factor product.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::linalg::Mat;

mod doubly_stochastic;
mod product;
mod spd;
mod sphere;
mod stiefel;

pub use doubly_stochastic::{ds_sinkhorn_retract, ds_tangent_project, sinkhorn, DoublyStochastic};
pub use product::{ProductManifold, ProductPoint, ProductTangent};
pub use spd::{random_spd_matrix, spd_egrad_to_rgrad, spd_exp, spd_log, spd_transport, Spd};
pub use sphere::{sphere_exp, sphere_log, sphere_transport, Sphere};
pub use stiefel::{stiefel_retract_qr, Stiefel};

/// Constraint tolerances used by the precondition checks.
///
/// Finite-difference Hessian products perturb points by `O(h)`, so the
/// tangency tolerance is looser than the point tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub point: f64,
    pub tangent: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            point: 1e-10,
            tangent: 1e-8,
        }
    }
}

/// Riemannian geometry of a single matrix manifold.
pub trait Manifold: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Intrinsic dimension.
    fn dim(&self) -> usize;

    /// Ambient `(rows, cols)` of points and tangent vectors.
    fn shape(&self) -> (usize, usize);

    fn inner(&self, p: &Mat, u: &Mat, v: &Mat) -> f64;

    fn norm(&self, p: &Mat, u: &Mat) -> f64 {
        self.inner(p, u, u).max(0.0).sqrt()
    }

    fn has_exp(&self) -> bool {
        true
    }

    fn exp(&self, p: &Mat, u: &Mat) -> Result<Mat>;

    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat>;

    fn has_log(&self) -> bool {
        false
    }

    fn log(&self, _p: &Mat, _q: &Mat) -> Result<Mat> {
        Err(Error::LogUnavailable(self.name()))
    }

    /// Riemannian distance; requires a logarithm map.
    fn dist(&self, p: &Mat, q: &Mat) -> Result<f64> {
        Ok(self.norm(p, &self.log(p, q)?))
    }

    /// Carries a tangent vector at `p` to the tangent space at `q`.
    fn transport(&self, p: &Mat, q: &Mat, u: &Mat) -> Result<Mat>;

    fn project_tangent(&self, p: &Mat, z: &Mat) -> Result<Mat>;

    fn egrad_to_rgrad(&self, p: &Mat, g: &Mat) -> Result<Mat>;

    fn random_point(&self, seed: u64) -> Mat;

    /// Random unit-norm tangent vector at `p`.
    fn random_tangent(&self, p: &Mat, seed: u64) -> Mat;

    /// Violation of the defining constraints at `p` (0 on the manifold).
    fn feasibility_residual(&self, p: &Mat) -> f64;

    /// Violation of the tangent-space constraints for `u` at `p`.
    fn tangency_residual(&self, p: &Mat, u: &Mat) -> f64;

    /// Curve point `c(1)` with `c(0) = p`, `c'(0) = u`, used to sample vector
    /// fields for finite differences. Any smooth curve with the right velocity
    /// works for a central difference; the default is the exponential map,
    /// else the retraction.
    fn fd_curve(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        if self.has_exp() {
            self.exp(p, u)
        } else {
            self.retract(p, u)
        }
    }

    /// Maps a vector field value sampled at `q` back to `p` before a finite
    /// difference. Geometries with closed-form parallel transport use it;
    /// embedded geometries keep the ambient value and project afterwards.
    fn fd_pullback(&self, _q: &Mat, _p: &Mat, v: &Mat) -> Result<Mat> {
        Ok(v.clone())
    }

    /// Christoffel term `Γ(u, v)` of the ambient connection, added to the
    /// ambient directional derivative `D v[u]` before projecting. Zero for
    /// Euclidean ambient metrics.
    fn connection_term(&self, _p: &Mat, _u: &Mat, _v: &Mat) -> Option<Mat> {
        None
    }

    fn has_connection_term(&self) -> bool {
        false
    }

    fn zero_tangent(&self, _p: &Mat) -> Mat {
        let (r, c) = self.shape();
        Mat::zeros(r, c)
    }
}

pub(crate) fn check_shape(name: &str, m: &Mat, shape: (usize, usize)) -> Result<()> {
    if m.shape() != shape {
        return Err(Error::DimensionMismatch(format!(
            "{name}: expected {}x{}, got {}x{}",
            shape.0,
            shape.1,
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}
