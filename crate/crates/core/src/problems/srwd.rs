//! Subspace-robust Wasserstein distance with entropic regularization:
//! `min_{Γ ∈ Π(a,b)} max_{U ∈ St(d,r)} Σᵢⱼ Γᵢⱼ ‖Uᵀ(xᵢ − yⱼ)‖² + ε Σᵢⱼ Γᵢⱼ (log Γᵢⱼ − 1)`.

use crate::error::{Error, Result};
use crate::linalg::{sym, Mat};
use crate::manifolds::{
    ds_tangent_project, DoublyStochastic, ProductManifold, ProductPoint, ProductTangent,
    Stiefel,
};

use super::MinMaxProblem;

const ENTROPY_FLOOR: f64 = 1e-300;
const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SrwdData {
    /// Source points, one per row (`m x d`).
    pub xs: Mat,
    /// Target points, one per row (`n x d`).
    pub ys: Mat,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub r: usize,
    pub eps: f64,
}

impl SrwdData {
    pub fn new(xs: Mat, ys: Mat, a: Vec<f64>, b: Vec<f64>, r: usize, eps: f64) -> Result<Self> {
        let d = xs.ncols();
        if ys.ncols() != d || a.len() != xs.nrows() || b.len() != ys.nrows() {
            return Err(Error::DimensionMismatch("srwd point clouds and weights disagree".into()));
        }
        if a.len() < 2 || b.len() < 2 {
            return Err(Error::InvalidConfig("srwd needs at least two points per cloud".into()));
        }
        for w in [&a, &b] {
            if w.iter().any(|v| !(*v > 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig("srwd weights must be positive and sum to one".into()));
            }
        }
        if r == 0 || r > d {
            return Err(Error::InvalidConfig(format!("subspace dimension r = {r} must lie in 1..={d}")));
        }
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidConfig(format!("eps = {eps} must be positive")));
        }
        Ok(Self { xs, ys, a, b, r, eps })
    }

    pub fn uniform(xs: Mat, ys: Mat, r: usize, eps: f64) -> Result<Self> {
        let a = vec![1.0 / xs.nrows() as f64; xs.nrows()];
        let b = vec![1.0 / ys.nrows() as f64; ys.nrows()];
        Self::new(xs, ys, a, b, r, eps)
    }

    pub fn with_subspace(self, r: usize, eps: f64) -> Result<Self> {
        Self::new(self.xs, self.ys, self.a, self.b, r, eps)
    }

    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    /// `Cᵢⱼ = ‖Uᵀ(xᵢ − yⱼ)‖²`.
    pub fn projected_costs(&self, u: &Mat) -> Mat {
        let px = &self.xs * u;
        let py = &self.ys * u;
        Mat::from_fn(px.nrows(), py.nrows(), |i, j| (px.row(i) - py.row(j)).norm_squared())
    }

    /// `V_Γ = Σᵢⱼ Γᵢⱼ (xᵢ − yⱼ)(xᵢ − yⱼ)ᵀ`.
    pub fn displacement_second_moment(&self, gamma: &Mat) -> Mat {
        let rows: Vec<f64> = gamma.row_iter().map(|r| r.sum()).collect();
        let cols: Vec<f64> = gamma.column_iter().map(|c| c.sum()).collect();
        let mut wx = self.xs.clone();
        for (i, s) in rows.iter().enumerate() {
            wx.row_mut(i).scale_mut(*s);
        }
        let mut wy = self.ys.clone();
        for (j, s) in cols.iter().enumerate() {
            wy.row_mut(j).scale_mut(*s);
        }
        let cross = self.xs.transpose() * gamma * &self.ys;
        sym(&(self.xs.transpose() * wx + self.ys.transpose() * wy - &cross - cross.transpose()))
    }
}

fn check_inputs(data: &SrwdData, gamma: &Mat, u: &Mat) -> Result<()> {
    let (m, n) = (data.a.len(), data.b.len());
    if gamma.shape() != (m, n) || u.shape() != (data.dim(), data.r) {
        return Err(Error::DimensionMismatch("srwd coupling or subspace has the wrong shape".into()));
    }
    if gamma.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::NotPositiveEntries);
    }
    let ds = DoublyStochastic::new(data.a.clone(), data.b.clone());
    let marg = ds.marginal_error(gamma);
    if !(marg <= FEASIBILITY_TOL) {
        return Err(Error::NotOnManifold(format!("srwd: marginal error {marg:e}")));
    }
    let orth = (u.transpose() * u - Mat::identity(data.r, data.r)).norm();
    if !(orth <= FEASIBILITY_TOL) {
        return Err(Error::NotOnManifold(format!("srwd: ‖UᵀU - I‖ = {orth:e}")));
    }
    Ok(())
}

/// Value and Riemannian gradients `(f, grad_Γ f, grad_U f)`.
pub fn srwd_value_grad(data: &SrwdData, gamma: &Mat, u: &Mat) -> Result<(f64, Mat, Mat)> {
    check_inputs(data, gamma, u)?;
    let cost = data.projected_costs(u);
    let log_gamma = gamma.map(|g| g.max(ENTROPY_FLOOR).ln());
    let value = gamma.dot(&cost) + data.eps * gamma.dot(&log_gamma.add_scalar(-1.0));

    let eg = cost + log_gamma * data.eps;
    let grad_gamma = ds_tangent_project(gamma, &gamma.component_mul(&eg))?;
    let eu = data.displacement_second_moment(gamma) * u * 2.0;
    let grad_u = &eu - u * sym(&(u.transpose() * &eu));
    Ok((value, grad_gamma, grad_u))
}

#[derive(Debug, Clone)]
pub struct Srwd {
    data: SrwdData,
    geometry: ProductManifold,
}

impl Srwd {
    pub fn new(data: SrwdData) -> Self {
        let geometry = ProductManifold::pair(
            DoublyStochastic::new(data.a.clone(), data.b.clone()),
            Stiefel::new(data.dim(), data.r),
        );
        Self { data, geometry }
    }

    pub fn data(&self) -> &SrwdData {
        &self.data
    }
}

impl MinMaxProblem for Srwd {
    fn name(&self) -> &str {
        "srwd"
    }

    fn geometry(&self) -> &ProductManifold {
        &self.geometry
    }

    fn value(&self, p: &ProductPoint) -> Result<f64> {
        Ok(srwd_value_grad(&self.data, p.x(), p.y())?.0)
    }

    fn rgrad(&self, p: &ProductPoint) -> Result<ProductTangent> {
        let (_, gg, gu) = srwd_value_grad(&self.data, p.x(), p.y())?;
        Ok(ProductTangent::pair(gg, gu))
    }

    /// Starts from the independent coupling `abᵀ` and a random subspace.
    fn initial_point(&self, seed: u64) -> ProductPoint {
        let gamma = Mat::from_fn(self.data.a.len(), self.data.b.len(), |i, j| self.data.a[i] * self.data.b[j]);
        let u = self.geometry.factor(1).random_point(seed);
        ProductPoint::pair(gamma, u)
    }
}
