//! Min-max objectives on product manifolds.
//!
//! Every problem is `min_x max_y f(x, y)` with `x` on the first factor of
//! [`MinMaxProblem::geometry`] and `y` on the second.

use crate::error::{Error, Result};
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent};

mod data;
mod quad_bilinear;
mod rgpca;
mod srwd;
mod tracelog;

pub use data::{fragmented_hypercube, random_spd_dataset};
pub use quad_bilinear::{
    qb_hamiltonian_closed_form, qb_hamiltonian_grad_closed_form, qb_opt_gap, qb_rgrad, qb_value,
    QbFiniteSum, QuadBilinear, QuadBilinearParams,
};
pub use rgpca::{rgpca_value_grad, Rgpca, RgpcaData};
pub use srwd::{srwd_value_grad, Srwd, SrwdData};
pub use tracelog::{tracelog_value, tracelog_value_grad, TraceLog};

/// The contract every min-max objective implements.
pub trait MinMaxProblem: Send + Sync {
    fn name(&self) -> &str;

    /// Product geometry `M_x × M_y`.
    fn geometry(&self) -> &ProductManifold;

    fn value(&self, p: &ProductPoint) -> Result<f64>;

    /// Riemannian gradient `(grad_x f, grad_y f)`.
    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent>;

    fn has_analytic_hvp(&self) -> bool {
        false
    }

    /// `Hess f(p)[u]` in closed form, when the problem provides it.
    fn analytic_hvp(&self, _p: &ProductPoint, _u: &ProductTangent) -> Result<ProductTangent> {
        Err(Error::AnalyticHvpUnavailable)
    }

    /// Problem-specific distance-to-solution metric.
    fn opt_gap(&self, _p: &ProductPoint) -> Option<f64> {
        None
    }

    /// Number of samples when `f` is a finite-sum average.
    fn sample_count(&self) -> Option<usize> {
        None
    }

    fn sample_value(&self, _i: usize, _p: &ProductPoint) -> Result<f64> {
        Err(Error::NoSampleOracle)
    }

    fn sample_rgrad(&self, _i: usize, _p: &ProductPoint) -> Result<ProductTangent> {
        Err(Error::NoSampleOracle)
    }

    fn sample_analytic_hvp(&self, _i: usize, _p: &ProductPoint, _u: &ProductTangent) -> Result<ProductTangent> {
        Err(Error::AnalyticHvpUnavailable)
    }

    /// Default starting point for experiments.
    fn initial_point(&self, seed: u64) -> ProductPoint {
        self.geometry().random_point(seed)
    }
}
