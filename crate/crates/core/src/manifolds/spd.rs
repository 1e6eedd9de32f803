use crate::error::Result;
use crate::linalg::{
    check_positive, cholesky, cholesky_solve, matfn_from_eig, sym, sym_eig, thin_qr, MatFn, Mat,
    SymMatrix,
};
use crate::rng::{gaussian_matrix, seeded};

use super::{check_shape, Manifold};

/// Square root and inverse square root of an SPD point.
struct Roots {
    sqrt: Mat,
    inv_sqrt: Mat,
}

fn roots(x: &Mat) -> Result<Roots> {
    let eig = sym_eig(&SymMatrix::new(x.clone())?)?;
    check_positive(&eig)?;
    Ok(Roots {
        sqrt: eig.apply(f64::sqrt),
        inv_sqrt: eig.apply(|l| 1.0 / l.sqrt()),
    })
}

fn congruence(a: &Mat, m: &Mat) -> Mat {
    sym(&(a * m * a))
}

fn matfn(m: Mat, f: MatFn) -> Result<Mat> {
    let eig = sym_eig(&SymMatrix::new(m)?)?;
    Ok(matfn_from_eig(&eig, f)?.into_inner())
}

/// `Exp_X(U) = X^{1/2} exp(X^{-1/2} U X^{-1/2}) X^{1/2}`.
pub fn spd_exp(x: &Mat, u: &Mat) -> Result<Mat> {
    let r = roots(x)?;
    let inner = matfn(congruence(&r.inv_sqrt, &sym(u)), MatFn::Exp)?;
    Ok(congruence(&r.sqrt, &inner))
}

/// `Log_X(Y) = X^{1/2} log(X^{-1/2} Y X^{-1/2}) X^{1/2}`.
pub fn spd_log(x: &Mat, y: &Mat) -> Result<Mat> {
    let r = roots(x)?;
    let inner = matfn(congruence(&r.inv_sqrt, &sym(y)), MatFn::Log)?;
    Ok(congruence(&r.sqrt, &inner))
}

/// Parallel transport `E U Eᵀ` with `E = (Y X⁻¹)^{1/2}`.
pub fn spd_transport(x: &Mat, y: &Mat, u: &Mat) -> Result<Mat> {
    let r = roots(x)?;
    let middle = matfn(congruence(&r.inv_sqrt, &sym(y)), MatFn::Sqrt)?;
    let e = &r.sqrt * middle * &r.inv_sqrt;
    Ok(sym(&(&e * sym(u) * e.transpose())))
}

/// Riemannian gradient `X sym(G) X` under the affine-invariant metric.
pub fn spd_egrad_to_rgrad(x: &Mat, g: &Mat) -> Mat {
    congruence(x, &sym(g))
}

/// `tr(X⁻¹ U X⁻¹ V)`.
pub(crate) fn spd_inner(x: &Mat, u: &Mat, v: &Mat) -> f64 {
    match cholesky(x) {
        Ok(l) => {
            let a = cholesky_solve(&l, u);
            let b = cholesky_solve(&l, v);
            a.dot(&b.transpose())
        }
        Err(_) => f64::NAN,
    }
}

/// Symmetric positive definite matrices with the affine-invariant metric.
#[derive(Debug, Clone)]
pub struct Spd {
    d: usize,
    spectrum: (f64, f64),
}

impl Spd {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            spectrum: (0.5, 2.0),
        }
    }

    /// Eigenvalue range used by [`Manifold::random_point`].
    pub fn with_spectrum(mut self, mu0: f64, mu1: f64) -> Self {
        self.spectrum = (mu0, mu1);
        self
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// `Q diag(λ) Qᵀ` with `λᵢ ~ U[mu0, mu1]` and a Haar-like orthogonal `Q`.
pub fn random_spd_matrix(d: usize, mu0: f64, mu1: f64, seed: u64) -> Mat {
    use rand::Rng;
    let mut rng = seeded(seed);
    let (q, _) = thin_qr(&gaussian_matrix(d, d, &mut rng)).expect("gaussian matrix has full rank");
    let lambda: Vec<f64> = (0..d)
        .map(|_| if mu1 > mu0 { rng.random_range(mu0..=mu1) } else { mu0 })
        .collect();
    let mut scaled = q.clone();
    for (j, l) in lambda.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*l);
    }
    sym(&(scaled * q.transpose()))
}

impl Manifold for Spd {
    fn name(&self) -> &'static str {
        "spd"
    }

    fn dim(&self) -> usize {
        self.d * (self.d + 1) / 2
    }

    fn shape(&self) -> (usize, usize) {
        (self.d, self.d)
    }

    fn inner(&self, p: &Mat, u: &Mat, v: &Mat) -> f64 {
        spd_inner(p, u, v)
    }

    fn exp(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        check_shape("spd tangent", u, self.shape())?;
        spd_exp(p, u)
    }

    /// Second-order retraction `X + U + ½ U X⁻¹ U`, always positive definite.
    fn retract(&self, p: &Mat, u: &Mat) -> Result<Mat> {
        let l = cholesky(p)?;
        let u = sym(u);
        let xinv_u = cholesky_solve(&l, &u);
        Ok(sym(&(p + &u + &u * xinv_u * 0.5)))
    }

    fn has_log(&self) -> bool {
        true
    }

    fn log(&self, p: &Mat, q: &Mat) -> Result<Mat> {
        spd_log(p, q)
    }

    fn transport(&self, p: &Mat, q: &Mat, u: &Mat) -> Result<Mat> {
        spd_transport(p, q, u)
    }

    fn project_tangent(&self, _p: &Mat, z: &Mat) -> Result<Mat> {
        check_shape("spd ambient", z, self.shape())?;
        Ok(sym(z))
    }

    fn egrad_to_rgrad(&self, p: &Mat, g: &Mat) -> Result<Mat> {
        check_shape("spd gradient", g, self.shape())?;
        Ok(spd_egrad_to_rgrad(p, g))
    }

    fn random_point(&self, seed: u64) -> Mat {
        random_spd_matrix(self.d, self.spectrum.0, self.spectrum.1, seed)
    }

    fn random_tangent(&self, p: &Mat, seed: u64) -> Mat {
        let s = sym(&gaussian_matrix(self.d, self.d, &mut seeded(seed)));
        let s = &s / s.norm();
        match roots(p) {
            Ok(r) => congruence(&r.sqrt, &s),
            Err(_) => s,
        }
    }

    fn feasibility_residual(&self, p: &Mat) -> f64 {
        let asym = (p - p.transpose()).norm();
        if cholesky(&sym(p)).is_err() {
            return f64::INFINITY;
        }
        asym
    }

    fn tangency_residual(&self, _p: &Mat, u: &Mat) -> f64 {
        (u - u.transpose()).norm()
    }

    fn fd_pullback(&self, q: &Mat, p: &Mat, v: &Mat) -> Result<Mat> {
        spd_transport(q, p, v)
    }
}
