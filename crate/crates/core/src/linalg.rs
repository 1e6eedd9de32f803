//! Dense symmetric linear algebra used by every geometry.
//!
//! Matrices are stored as `nalgebra::DMatrix<f64>`; the factorizations here
//! (cyclic Jacobi eigensolver, sign-fixed Householder QR, Cholesky) are
//! implemented directly so that every manifold operation is a deterministic
//! function of its inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_REL_TOL: f64 = 1e-13;
const PD_REL_TOL: f64 = 1e-14;
const QR_RANK_TOL: f64 = 1e-12;

/// `(m + mᵀ) / 2`.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius inner product `tr(aᵀ b)`.
pub fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// A real symmetric matrix. Construction symmetrizes the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Mat);

impl SymMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        Ok(Self(sym(&m)))
    }

    pub fn identity(d: usize) -> Self {
        Self(Mat::identity(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(Mat::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }
}

impl AsRef<Mat> for SymMatrix {
    fn as_ref(&self) -> &Mat {
        &self.0
    }
}

/// `A = Q diag(lambda) Qᵀ` with eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFactorization {
    pub q: Mat,
    pub lambda: Vec<f64>,
}

impl EigenFactorization {
    pub fn reconstruct(&self) -> Mat {
        self.apply(|l| l)
    }

    /// `Q diag(f(λᵢ)) Qᵀ`, symmetrized.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Mat {
        let d = self.lambda.len();
        let mut scaled = self.q.clone();
        for (j, &l) in self.lambda.iter().enumerate() {
            let fl = f(l);
            for i in 0..d {
                scaled[(i, j)] *= fl;
            }
        }
        sym(&(scaled * self.q.transpose()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenFactorization> {
    let mut m = a.as_matrix().clone();
    if !is_finite(&m) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    let mut q = Mat::identity(n, n);
    let threshold = JACOBI_REL_TOL * m.norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) <= threshold {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apr);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut q, p, r, c, s);
            }
        }
    }
    if !is_finite(&m) {
        return Err(Error::NonFinite);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let lambda = order.iter().map(|&i| m[(i, i)]).collect();
    let q_sorted = Mat::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok(EigenFactorization {
        q: q_sorted,
        lambda,
    })
}

fn off_diagonal_norm(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

// A <- Jᵀ A J, Q <- Q J with J the (p, r) plane rotation [[c, s], [-s, c]].
fn rotate(m: &mut Mat, q: &mut Mat, p: usize, r: usize, c: f64, s: f64) {
    let n = m.nrows();
    for k in 0..n {
        let akp = m[(k, p)];
        let akr = m[(k, r)];
        m[(k, p)] = c * akp - s * akr;
        m[(k, r)] = s * akp + c * akr;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let ark = m[(r, k)];
        m[(p, k)] = c * apk - s * ark;
        m[(r, k)] = s * apk + c * ark;
    }
    m[(p, r)] = 0.0;
    m[(r, p)] = 0.0;
    for k in 0..n {
        let qkp = q[(k, p)];
        let qkr = q[(k, r)];
        q[(k, p)] = c * qkp - s * qkr;
        q[(k, r)] = s * qkp + c * qkr;
    }
}

/// Scalar function applied through the eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatFn {
    Exp,
    Log,
    Sqrt,
    InvSqrt,
    Power(f64),
}

impl MatFn {
    fn requires_positive(self) -> bool {
        !matches!(self, MatFn::Exp)
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            MatFn::Exp => x.exp(),
            MatFn::Log => x.ln(),
            MatFn::Sqrt => x.sqrt(),
            MatFn::InvSqrt => 1.0 / x.sqrt(),
            MatFn::Power(t) => x.powf(t),
        }
    }
}

pub fn check_positive(eig: &EigenFactorization) -> Result<()> {
    let min = eig.min_eigenvalue();
    if min <= PD_REL_TOL * eig.max_abs_eigenvalue() || min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: min });
    }
    Ok(())
}

pub fn spd_matfn(a: &SymMatrix, f: MatFn) -> Result<SymMatrix> {
    let eig = sym_eig(a)?;
    matfn_from_eig(&eig, f)
}

pub fn matfn_from_eig(eig: &EigenFactorization, f: MatFn) -> Result<SymMatrix> {
    if f.requires_positive() {
        check_positive(eig)?;
    }
    Ok(SymMatrix(eig.apply(|l| f.eval(l))))
}

/// Thin QR `A = QR` (Householder) with `diag(R) > 0`.
pub fn thin_qr(a: &Mat) -> Result<(Mat, Mat)> {
    let (d, r) = a.shape();
    if r > d {
        return Err(Error::DimensionMismatch(format!(
            "thin QR needs rows >= cols, got {d}x{r}"
        )));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let scale = a.norm();
    let mut work = a.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(r);

    for k in 0..r {
        let mut v = DVector::from_fn(d - k, |i, _| work[(k + i, k)]);
        let alpha = v.norm();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            for j in k..r {
                let mut dot = 0.0;
                for i in 0..(d - k) {
                    dot += v[i] * work[(k + i, j)];
                }
                for i in 0..(d - k) {
                    work[(k + i, j)] -= 2.0 * v[i] * dot;
                }
            }
        }
        reflectors.push(v);
    }

    let mut rmat = Mat::from_fn(r, r, |i, j| if i <= j { work[(i, j)] } else { 0.0 });
    for (i, _) in reflectors.iter().enumerate() {
        let value = rmat[(i, i)];
        if value.abs() <= QR_RANK_TOL * scale || scale == 0.0 {
            return Err(Error::RankDeficient { index: i, value });
        }
    }

    // Q = H_0 H_1 ... H_{r-1} applied to the first r columns of I.
    let mut q = Mat::from_fn(d, r, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..r).rev() {
        let v = &reflectors[k];
        for j in 0..r {
            let mut dot = 0.0;
            for i in 0..(d - k) {
                dot += v[i] * q[(k + i, j)];
            }
            for i in 0..(d - k) {
                q[(k + i, j)] -= 2.0 * v[i] * dot;
            }
        }
    }

    for i in 0..r {
        if rmat[(i, i)] < 0.0 {
            for j in 0..r {
                rmat[(i, j)] = -rmat[(i, j)];
            }
            for row in 0..d {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Ok((q, rmat))
}

/// Lower Cholesky factor of an SPD matrix.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch("cholesky needs a square matrix".into()));
    }
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { min_eig: diag });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ X = B` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Mat, b: &Mat) -> Mat {
    let n = l.nrows();
    let mut x = b.clone();
    for col in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

pub fn spd_inverse(a: &Mat) -> Result<Mat> {
    let l = cholesky(a)?;
    Ok(sym(&cholesky_solve(&l, &Mat::identity(a.nrows(), a.nrows()))))
}

/// `log det A` through the Cholesky factor.
pub fn logdet_spd(a: &Mat) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>())
}
