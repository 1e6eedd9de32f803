use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, Mat};
use crate::rng::{gaussian_matrix, seeded};

use super::{check_shape, Manifold};

const SINKHORN_TOL: f64 = 1e-10;
const SINKHORN_TARGET: f64 = 1e-14;
const SINKHORN_MAX_ITERS: usize = 10_000;
const SINKHORN_SWEEPS_BEFORE_NEWTON: usize = 200;
const SINKHORN_NEWTON_STEPS: usize = 50;
const ENTRY_FLOOR: f64 = 1e-300;

fn marginal_error(g: &Mat, a: &[f64], b: &[f64]) -> f64 {
    let row: f64 = g
        .row_iter()
        .zip(a)
        .map(|(r, ai)| (r.sum() - ai).abs())
        .sum();
    let col: f64 = g
        .column_iter()
        .zip(b)
        .map(|(c, bj)| (c.sum() - bj).abs())
        .sum();
    row.max(col)
}

/// Sinkhorn–Knopp scaling `diag(u) A diag(v)` onto the marginals `(a, b)`.
///
/// Plain alternating scaling is slow on nearly block-diagonal inputs (cross
/// entries many orders of magnitude below the rest), which entropic couplings
/// produce routinely. After a bounded number of sweeps the remaining error is
/// removed with damped Newton steps on the log-scalings, whose Jacobian is the
/// same bordered system as the tangent projection. The target is an ℓ₁
/// marginal error of `1e-14`; anything at or below `1e-10` is accepted once
/// progress stalls, so nearby inputs give nearby outputs.
pub fn sinkhorn(a_mat: &Mat, a: &[f64], b: &[f64]) -> Result<Mat> {
    let (m, n) = a_mat.shape();
    if a.len() != m || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "sinkhorn: {m}x{n} matrix with marginals of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a_mat.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NotPositiveEntries);
    }
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; n];
    let mut prev = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < SINKHORN_MAX_ITERS {
        sweeps += 1;
        for i in 0..m {
            let s: f64 = (0..n).map(|j| a_mat[(i, j)] * v[j]).sum();
            u[i] = a[i] / s.max(ENTRY_FLOOR);
        }
        for j in 0..n {
            let s: f64 = (0..m).map(|i| a_mat[(i, j)] * u[i]).sum();
            v[j] = b[j] / s.max(ENTRY_FLOOR);
        }
        let g = scaled(a_mat, &u, &v);
        // Columns are exact after the v-update; only rows can be off.
        let residual = marginal_error(&g, a, b);
        if residual <= SINKHORN_TARGET || (residual > 0.5 * prev && residual <= SINKHORN_TOL) {
            return Ok(g);
        }
        if sweeps >= SINKHORN_SWEEPS_BEFORE_NEWTON && residual > 0.5 * prev {
            break;
        }
        prev = residual;
    }
    let g = newton_polish(scaled(a_mat, &u, &v), a, b);
    let residual = marginal_error(&g, a, b);
    if residual <= SINKHORN_TOL {
        return Ok(g);
    }
    Err(Error::SinkhornNotConverged {
        residual,
        iterations: sweeps,
    })
}

fn scaled(a_mat: &Mat, u: &[f64], v: &[f64]) -> Mat {
    Mat::from_fn(a_mat.nrows(), a_mat.ncols(), |i, j| (u[i] * a_mat[(i, j)] * v[j]).max(ENTRY_FLOOR))
}

// Newton on Γ(α, β) = diag(e^α) Γ diag(e^β) for the marginal equations,
// with step halving on the ℓ₁ error. Stops at the target or when no
// step improves the error.
fn newton_polish(mut g: Mat, a: &[f64], b: &[f64]) -> Mat {
    let (m, n) = g.shape();
    let mut err = marginal_error(&g, a, b);
    for _ in 0..SINKHORN_NEWTON_STEPS {
        if err <= SINKHORN_TARGET {
            break;
        }
        // Solve [diag(Γ1) Γ; Γᵀ diag(Γᵀ1)] (α, β) = (a − Γ1, b − Γᵀ1) with β_n = 0.
        let size = m + n - 1;
        let mut sys = Mat::zeros(size, size);
        let mut res = Mat::zeros(size, 1);
        for i in 0..m {
            sys[(i, i)] = g.row(i).sum();
            res[(i, 0)] = a[i] - g.row(i).sum();
            for j in 0..(n - 1) {
                sys[(i, m + j)] = g[(i, j)];
                sys[(m + j, i)] = g[(i, j)];
            }
        }
        for j in 0..(n - 1) {
            sys[(m + j, m + j)] = g.column(j).sum();
            res[(m + j, 0)] = b[j] - g.column(j).sum();
        }
        let Ok(l) = cholesky(&sys) else { break };
        let sol = cholesky_solve(&l, &res);
        if sol.iter().any(|x| !x.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = Mat::from_fn(m, n, |i, j| {
                let beta = if j + 1 < n { sol[(m + j, 0)] } else { 0.0 };
                (g[(i, j)] * (t * (sol[(i, 0)] + beta)).exp()).max(ENTRY_FLOOR)
            });
            let e = marginal_error(&trial, a, b);
            if e < err {
                g = trial;
                err = e;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    g
}

/// Fisher-metric orthogonal projection onto `{U : U1 = 0, Uᵀ1 = 0}`.
///
/// The normal component has the form `(α1ᵀ + 1βᵀ) ⊙ Γ`; `(α, β)` solve a
/// symmetric system that is singular by one, so `β_n` is pinned to zero.
pub fn ds_tangent_project(gamma: &Mat, z: &Mat) -> Result<Mat> {
    let (m, n) = gamma.shape();
    if z.shape() != (m, n) {
        return Err(Error::DimensionMismatch("ds projection shapes differ".into()));
    }
    let size = m + n - 1;
    let mut sys = Mat::zeros(size, size);
    let mut rhs = Mat::zeros(size, 1);
    for i in 0..m {
        sys[(i, i)] = gamma.row(i).sum();
        rhs[(i, 0)] = z.row(i).sum();
        for j in 0..(n - 1) {
            sys[(i, m + j)] = gamma[(i, j)];
            sys[(m + j, i)] = gamma[(i, j)];
        }
    }
    for j in 0..(n - 1) {
        sys[(m + j, m + j)] = gamma.column(j).sum();
        rhs[(m + j, 0)] = z.column(j).sum();
    }
    let l = cholesky(&sys).map_err(|_| Error::SingularSystem)?;
    let sol = cholesky_solve(&l, &rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let beta = |j: usize| if j + 1 < n { sol[(m + j, 0)] } else { 0.0 };
    Ok(Mat::from_fn(m, n, |i, j| {
        z[(i, j)] - (sol[(i, 0)] + beta(j)) * gamma[(i, j)]
    }))
}

/// `R_Γ(U) = Sinkhorn(Γ ⊙ exp(U ⊘ Γ))`.
pub fn ds_sinkhorn_retract(gamma: &Mat, u: &Mat, a: &[f64], b: &[f64]) -> Result<Mat> {
    if gamma.shape() != u.shape() {
        return Err(Error::DimensionMismatch("ds retraction shapes differ".into()));
    }
    let scaled = gamma.zip_map(u, |g, x| {
        let g = g.max(ENTRY_FLOOR);
        g * (x / g).exp()
    });
    if scaled.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    sinkhorn(&scaled.map(|v| v.max(ENTRY_FLOOR)), a, b)
}

/// Couplings `Π(a, b)` with the Fisher information metric
/// `⟨U, V⟩_Γ = Σ UᵢⱼVᵢⱼ / Γᵢⱼ` and the Sinkhorn retraction.
#[derive(Debug, Clone)]
pub struct DoublyStochastic {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DoublyStochastic {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        assert!(a.len() >= 2 && b.len() >= 2, "couplings need at least 2x2 entries");
        Self { a, b }
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        Self::new(vec![1.0 / m as f64; m], vec![1.0 / n as f64; n])
    }

    pub fn marginals(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    pub fn marginal_error(&self, gamma: &Mat) -> f64 {
        marginal_error(gamma, &self.a, &self.b)
    }
}

impl Manifold for DoublyStochastic {
    fn name(&self) -> &'static str {
        "doubly-stochastic"
    }

    fn dim(&self) -> usize {
        (self.a.len() - 1) * (self.b.len() - 1)
    }

    fn shape(&self) -> (usize, usize) {
        (self.a.len(), self.b.len())
    }

    fn inner(&self, p: &Mat, u: &Mat, v: &Mat) -> f64 {
        let mut acc = 0.0;
        for ((g, x), y) in p.iter().zip(u.iter()).zip(v.iter()) {
            acc += x * y / g.max(ENTRY_FLOOR);
        }
        acc
    }

    fn has_exp(&self) -> bool {
        false
    }

    fn exp(&self, _p: &Mat, _u: &Mat) -> Result<Mat> {
        Err(Error::ExpUnavailable(self.name()))
    }

    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        ds_sinkhorn_retract(p, u, &self.a, &self.b)
    }

    /// `Sinkhorn((√Γ + U ⊘ (2√Γ))²)`: a straight line in the coordinates
    /// `s = 2√Γ` where the Fisher metric is Euclidean. Unlike the retraction
    /// its exponent does not blow up on tiny entries, so finite differences
    /// stay well conditioned.
    fn fd_curve(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        check_shape("coupling tangent", u, self.shape())?;
        let moved = p.zip_map(u, |g, x| {
            let r = g.max(ENTRY_FLOOR).sqrt();
            let s = r + x / (2.0 * r);
            (s * s).max(ENTRY_FLOOR)
        });
        if moved.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        sinkhorn(&moved, &self.a, &self.b)
    }

    fn transport(&self, _p: &Mat, q: &Mat, u: &Mat) -> Result<Mat> {
        ds_tangent_project(q, u)
    }

    fn project_tangent(&self, p: &Mat, z: &Mat) -> Result<Mat> {
        check_shape("coupling ambient", z, self.shape())?;
        ds_tangent_project(p, z)
    }

    fn egrad_to_rgrad(&self, p: &Mat, g: &Mat) -> Result<Mat> {
        check_shape("coupling gradient", g, self.shape())?;
        ds_tangent_project(p, &p.component_mul(g))
    }

    fn random_point(&self, seed: u64) -> Mat {
        let (m, n) = self.shape();
        let g = gaussian_matrix(m, n, &mut seeded(seed)).map(f64::exp);
        sinkhorn(&g, &self.a, &self.b).expect("sinkhorn converges on exp-gaussian matrices")
    }

    fn random_tangent(&self, p: &Mat, seed: u64) -> Mat {
        let (m, n) = self.shape();
        let z = p.component_mul(&gaussian_matrix(m, n, &mut seeded(seed)));
        let u = ds_tangent_project(p, &z).expect("projection at a feasible coupling");
        let nrm = self.norm(p, &u);
        u / nrm
    }

    fn feasibility_residual(&self, p: &Mat) -> f64 {
        if p.iter().any(|v| !(*v > 0.0)) {
            return f64::INFINITY;
        }
        marginal_error(p, &self.a, &self.b)
    }

    fn tangency_residual(&self, _p: &Mat, u: &Mat) -> f64 {
        let rows: f64 = u.row_iter().map(|r| r.sum().abs()).sum();
        let cols: f64 = u.column_iter().map(|c| c.sum().abs()).sum();
        rows.max(cols)
    }

    fn has_connection_term(&self) -> bool {
        true
    }

    /// The Fisher metric `diag(1/Γ)` has Christoffel symbols
    /// `Γᵏₖₖ = -1/(2Γₖ)`, so `∇_u v = Dv[u] - (u ⊙ v) ⊘ (2Γ)` in the orthant.
    fn connection_term(&self, p: &Mat, u: &Mat, v: &Mat) -> Option<Mat> {
        Some(Mat::from_fn(p.nrows(), p.ncols(), |i, j| {
            -u[(i, j)] * v[(i, j)] / (2.0 * p[(i, j)].max(ENTRY_FLOOR))
        }))
    }
}
