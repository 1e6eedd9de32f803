//! The Riemannian Hamiltonian `ℋ(p) = ½‖grad f(p)‖²` and its gradient
//! `grad ℋ(p) = Hess f(p)[grad f(p)]`.

use crate::error::{Error, Result};
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent};
use crate::problems::MinMaxProblem;

/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

const DEGENERATE_DIRECTION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvpMode {
    Analytic,
    FiniteDifference,
}

/// A problem together with the rule for Hessian-vector products.
#[derive(Clone, Copy)]
pub struct HamiltonianOracle<'a> {
    problem: &'a dyn MinMaxProblem,
    mode: HvpMode,
    fd_step: f64,
}

impl std::fmt::Debug for HamiltonianOracle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianOracle")
            .field("problem", &self.problem.name())
            .field("mode", &self.mode)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl<'a> HamiltonianOracle<'a> {
    /// Uses the analytic Hessian when the problem has one.
    pub fn new(problem: &'a dyn MinMaxProblem) -> Self {
        let mode = if problem.has_analytic_hvp() {
            HvpMode::Analytic
        } else {
            HvpMode::FiniteDifference
        };
        Self {
            problem,
            mode,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_mode(problem: &'a dyn MinMaxProblem, mode: HvpMode) -> Result<Self> {
        if mode == HvpMode::Analytic && !problem.has_analytic_hvp() {
            return Err(Error::AnalyticHvpUnavailable);
        }
        Ok(Self {
            mode,
            ..Self::new(problem)
        })
    }

    pub fn with_fd_step(mut self, h0: f64) -> Self {
        self.fd_step = h0;
        self
    }

    pub fn problem(&self) -> &'a dyn MinMaxProblem {
        self.problem
    }

    pub fn geometry(&self) -> &'a ProductManifold {
        self.problem.geometry()
    }

    pub fn mode(&self) -> HvpMode {
        self.mode
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// `½‖g‖²_p` for a gradient already evaluated at `p`.
    pub fn hamiltonian_from_grad(&self, p: &ProductPoint, g: &ProductTangent) -> f64 {
        let n = self.geometry().norm(p, g);
        0.5 * n * n
    }

    /// `Hess f(p)[u]`; `grad_p` is `grad f(p)` when the caller already has it.
    pub fn hvp(&self, p: &ProductPoint, u: &ProductTangent, grad_p: Option<&ProductTangent>) -> Result<ProductTangent> {
        match self.mode {
            HvpMode::Analytic => self.problem.analytic_hvp(p, u),
            HvpMode::FiniteDifference => fd_hvp_with(
                self.geometry(),
                p,
                u,
                |q| self.problem.rgrad(q),
                grad_p,
                self.fd_step,
            ),
        }
    }

    /// `grad ℋ(p)` from `g = grad f(p)`.
    pub fn hamiltonian_grad_from(&self, p: &ProductPoint, g: &ProductTangent) -> Result<ProductTangent> {
        let hg = self.hvp(p, g, Some(g))?;
        if !hg.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(hg)
    }

    fn sample_hvp(&self, i: usize, p: &ProductPoint, u: &ProductTangent, grad_p: &ProductTangent) -> Result<ProductTangent> {
        match self.mode {
            HvpMode::Analytic => self.problem.sample_analytic_hvp(i, p, u),
            HvpMode::FiniteDifference => fd_hvp_with(
                self.geometry(),
                p,
                u,
                |q| self.problem.sample_rgrad(i, q),
                Some(grad_p),
                self.fd_step,
            ),
        }
    }
}

/// `ℋ(p) = ½(‖grad_x f‖² + ‖grad_y f‖²)` in the factor metrics.
pub fn hamiltonian_value(oracle: &HamiltonianOracle<'_>, p: &ProductPoint) -> Result<f64> {
    let g = oracle.problem.rgrad(p)?;
    Ok(oracle.hamiltonian_from_grad(p, &g))
}

/// Central-difference covariant derivative of `grad f` along `u`.
pub fn fd_hvp(oracle: &HamiltonianOracle<'_>, p: &ProductPoint, u: &ProductTangent) -> Result<ProductTangent> {
    fd_hvp_with(oracle.geometry(), p, u, |q| oracle.problem.rgrad(q), None, oracle.fd_step)
}

/// Covariant finite difference of an arbitrary gradient field.
///
/// Samples the field at `q± = c(±h e)` along each factor's finite-difference
/// curve (the exponential map where there is one) with `e = u/‖u‖` and
/// `h = h₀(1 + ‖p‖)`, brings the values back to `p` per factor, differences
/// them and projects onto `T_p M`.
pub fn fd_hvp_with(
    geometry: &ProductManifold,
    p: &ProductPoint,
    u: &ProductTangent,
    grad: impl Fn(&ProductPoint) -> Result<ProductTangent>,
    grad_p: Option<&ProductTangent>,
    h0: f64,
) -> Result<ProductTangent> {
    let un = geometry.norm(p, u);
    if !un.is_finite() {
        return Err(Error::NonFinite);
    }
    if un < DEGENERATE_DIRECTION {
        return Ok(geometry.zero_tangent(p));
    }
    let e = u.scale(1.0 / un);
    let h = h0 * (1.0 + p.ambient_norm());
    let q_plus = geometry.fd_curve(p, &e.scale(h))?;
    let q_minus = geometry.fd_curve(p, &e.scale(-h))?;
    let g_plus = grad(&q_plus)?;
    let g_minus = grad(&q_minus)?;

    let needs_connection = geometry.factors().iter().any(|f| f.has_connection_term());
    let owned_grad;
    let v_p = match (needs_connection, grad_p) {
        (false, _) => None,
        (true, Some(g)) => Some(g),
        (true, None) => {
            owned_grad = grad(p)?;
            Some(&owned_grad)
        }
    };

    let mut parts = Vec::with_capacity(p.parts.len());
    for (i, m) in geometry.factors().iter().enumerate() {
        let plus = m.fd_pullback(&q_plus.parts[i], &p.parts[i], &g_plus.parts[i])?;
        let minus = m.fd_pullback(&q_minus.parts[i], &p.parts[i], &g_minus.parts[i])?;
        let mut d = (plus - minus) / (2.0 * h);
        if let Some(v) = v_p {
            if let Some(c) = m.connection_term(&p.parts[i], &e.parts[i], &v.parts[i]) {
                d += c;
            }
        }
        parts.push(m.project_tangent(&p.parts[i], &(d * un))?);
    }
    let out = ProductTangent::new(parts);
    if !out.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

/// `grad ℋ(p) = Hess f(p)[grad f(p)]`.
pub fn hamiltonian_grad(oracle: &HamiltonianOracle<'_>, p: &ProductPoint) -> Result<ProductTangent> {
    let g = oracle.problem.rgrad(p)?;
    oracle.hamiltonian_grad_from(p, &g)
}

/// `v(p) = (grad_x f, −grad_y f)` from an evaluated gradient.
pub fn minmax_from_grad(g: &ProductTangent) -> ProductTangent {
    let mut v = g.clone();
    for part in v.parts.iter_mut().skip(1) {
        part.neg_mut();
    }
    v
}

/// `v(p) = (grad_x f(p), −grad_y f(p))`.
pub fn minmax_gradient(problem: &dyn MinMaxProblem, p: &ProductPoint) -> Result<ProductTangent> {
    Ok(minmax_from_grad(&problem.rgrad(p)?))
}

fn sample_grad_mean(oracle: &HamiltonianOracle<'_>, p: &ProductPoint, set: &[usize]) -> Result<ProductTangent> {
    let mut acc: Option<ProductTangent> = None;
    for &i in set {
        let g = oracle.problem.sample_rgrad(i, p)?;
        acc = Some(match acc {
            None => g,
            Some(a) => &a + &g,
        });
    }
    let acc = acc.ok_or_else(|| Error::InvalidConfig("empty sample set".into()))?;
    Ok(acc.scale(1.0 / set.len() as f64))
}

fn sample_hvp_mean(
    oracle: &HamiltonianOracle<'_>,
    p: &ProductPoint,
    set: &[usize],
    u: &ProductTangent,
) -> Result<ProductTangent> {
    let mut acc = oracle.geometry().zero_tangent(p);
    for &i in set {
        let grad_i = oracle.problem.sample_rgrad(i, p)?;
        acc = &acc + &oracle.sample_hvp(i, p, u, &grad_i)?;
    }
    Ok(acc.scale(1.0 / set.len() as f64))
}

/// Symmetrized mini-batch estimator
/// `(1/|S||S'|) Σ_{ω∈S, φ∈S'} ½ Hess f_ω[grad f_φ] + ½ Hess f_φ[grad f_ω]`.
///
/// Hessian products are linear in their argument, so the double sum is
/// evaluated as `½ H_S[ḡ_{S'}] + ½ H_{S'}[ḡ_S]` with batch means `ḡ` and
/// `H`. Samples are accumulated in the given order.
pub fn stochastic_hamiltonian_grad(
    oracle: &HamiltonianOracle<'_>,
    p: &ProductPoint,
    s: &[usize],
    s_prime: &[usize],
) -> Result<ProductTangent> {
    if oracle.problem.sample_count().is_none() {
        return Err(Error::NoSampleOracle);
    }
    if s.is_empty() || s_prime.is_empty() {
        return Err(Error::InvalidConfig("sample sets must be nonempty".into()));
    }
    let g_s = sample_grad_mean(oracle, p, s)?;
    let g_sp = sample_grad_mean(oracle, p, s_prime)?;
    let a = sample_hvp_mean(oracle, p, s, &g_sp)?;
    let b = sample_hvp_mean(oracle, p, s_prime, &g_s)?;
    let out = (&a + &b).scale(0.5);
    if !out.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(out)
}

/// Mini-batch min-max gradient `(ḡ_x, −ḡ_y)` over `set`.
pub fn stochastic_minmax_gradient(
    problem: &dyn MinMaxProblem,
    p: &ProductPoint,
    set: &[usize],
) -> Result<ProductTangent> {
    if problem.sample_count().is_none() {
        return Err(Error::NoSampleOracle);
    }
    let oracle = HamiltonianOracle::new(problem);
    Ok(minmax_from_grad(&sample_grad_mean(&oracle, p, set)?))
}
