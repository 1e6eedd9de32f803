//! Line searches on `φ(η) = ℋ(R_p(η ξ))`.

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianOracle;
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent};

use super::{evaluate, Evaluated};

const MAX_HALVINGS: usize = 60;
const MAX_WOLFE_EVALUATIONS: usize = 60;
const CURVE_FD_STEP: f64 = 1e-6;

/// An accepted step and everything evaluated at the new point.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub point: ProductPoint,
    pub grad: ProductTangent,
    pub grad_norm: f64,
    pub hamiltonian: f64,
    /// `grad ℋ` at the new point, when the search needed it.
    pub hgrad: Option<ProductTangent>,
    /// `φ'(step)`, when the search needed it.
    pub slope: Option<f64>,
    pub evaluations: usize,
}

impl LineSearchOutcome {
    pub(crate) fn evaluated(&self) -> Evaluated {
        Evaluated {
            grad: self.grad.clone(),
            grad_norm: self.grad_norm,
        }
    }
}

/// Velocity `d/dη R_p(η ξ)` at `η = alpha`, expressed at `q = R_p(alpha ξ)`.
///
/// Along geodesics this is the parallel transport of `ξ`; for retractions it
/// is a central difference of the curve projected onto `T_q M`.
pub fn curve_velocity(
    geometry: &ProductManifold,
    p: &ProductPoint,
    xi: &ProductTangent,
    alpha: f64,
    q: &ProductPoint,
    use_retraction: bool,
) -> Result<ProductTangent> {
    let mut parts = Vec::with_capacity(p.parts.len());
    for (i, m) in geometry.factors().iter().enumerate() {
        let (pi, xii, qi) = (&p.parts[i], &xi.parts[i], &q.parts[i]);
        if m.has_exp() && !use_retraction {
            parts.push(m.transport(pi, qi, xii)?);
            continue;
        }
        let xn = xii.norm();
        if xn == 0.0 {
            parts.push(m.zero_tangent(qi));
            continue;
        }
        let eps = CURVE_FD_STEP * (1.0 + pi.norm()) / xn;
        let plus = m.retract(pi, &(xii * (alpha + eps)))?;
        let minus = m.retract(pi, &(xii * (alpha - eps)))?;
        parts.push(m.project_tangent(qi, &((plus - minus) / (2.0 * eps)))?);
    }
    Ok(ProductTangent::new(parts))
}

struct Trial {
    alpha: f64,
    point: ProductPoint,
    eval: Evaluated,
    h: f64,
    hgrad: Option<ProductTangent>,
    slope: Option<f64>,
}

impl Trial {
    fn into_outcome(self, evaluations: usize) -> LineSearchOutcome {
        LineSearchOutcome {
            step: self.alpha,
            point: self.point,
            grad_norm: self.eval.grad_norm,
            grad: self.eval.grad,
            hamiltonian: self.h,
            hgrad: self.hgrad,
            slope: self.slope,
            evaluations,
        }
    }
}

struct Search<'o, 'a> {
    oracle: &'o HamiltonianOracle<'a>,
    p: &'o ProductPoint,
    xi: &'o ProductTangent,
    use_retraction: bool,
    evaluations: usize,
}

impl Search<'_, '_> {
    /// `φ(alpha)`; `None` when the trial point cannot be evaluated, which the
    /// searches treat as `φ = +∞`.
    fn phi(&mut self, alpha: f64) -> Option<Trial> {
        self.evaluations += 1;
        let point = self
            .oracle
            .geometry()
            .step(self.p, &self.xi.scale(alpha), self.use_retraction)
            .ok()?;
        let eval = evaluate(self.oracle.problem(), &point).ok()?;
        let h = 0.5 * eval.grad_norm * eval.grad_norm;
        Some(Trial {
            alpha,
            point,
            eval,
            h,
            hgrad: None,
            slope: None,
        })
    }

    /// `φ'(alpha)`; `None` when the slope cannot be evaluated at the trial
    /// point (e.g. the curve leaves the representable range right past it),
    /// which the search treats like an infinite `φ`.
    fn dphi(&self, t: &mut Trial) -> Option<f64> {
        if let Some(s) = t.slope {
            return Some(s);
        }
        let geometry = self.oracle.geometry();
        let hg = self.oracle.hamiltonian_grad_from(&t.point, &t.eval.grad).ok()?;
        let vel = curve_velocity(geometry, self.p, self.xi, t.alpha, &t.point, self.use_retraction).ok()?;
        let s = geometry.inner(&t.point, &hg, &vel);
        if !s.is_finite() {
            return None;
        }
        t.hgrad = Some(hg);
        t.slope = Some(s);
        Some(s)
    }
}

/// Slope `⟨grad ℋ(p), ξ⟩`, rejecting non-descent directions.
fn descent_slope(geometry: &ProductManifold, p: &ProductPoint, hgrad: &ProductTangent, xi: &ProductTangent) -> Result<f64> {
    let slope = geometry.inner(p, hgrad, xi);
    if !(slope < 0.0) {
        return Err(Error::NotDescentDirection { slope });
    }
    Ok(slope)
}

/// Largest `η ∈ {η̄, ϱη̄, ϱ²η̄, …}` with
/// `ℋ(p) − ℋ(R_p(η ξ)) ≥ −r₁ η ⟨grad ℋ(p), ξ⟩`.
#[allow(clippy::too_many_arguments)]
pub fn backtracking_linesearch(
    oracle: &HamiltonianOracle<'_>,
    p: &ProductPoint,
    h0: f64,
    hgrad: &ProductTangent,
    xi: &ProductTangent,
    eta_bar: f64,
    r1: f64,
    rho: f64,
    use_retraction: bool,
) -> Result<LineSearchOutcome> {
    let slope0 = descent_slope(oracle.geometry(), p, hgrad, xi)?;
    let mut search = Search {
        oracle,
        p,
        xi,
        use_retraction,
        evaluations: 0,
    };
    let mut alpha = eta_bar;
    for _ in 0..=MAX_HALVINGS {
        if let Some(t) = search.phi(alpha) {
            if t.h <= h0 + r1 * alpha * slope0 {
                let n = search.evaluations;
                return Ok(t.into_outcome(n));
            }
        }
        alpha *= rho;
    }
    Err(Error::LineSearchFailed {
        evaluations: search.evaluations,
    })
}

/// Bracketing and zoom search for the strong Wolfe conditions
/// `φ(η) ≤ φ(0) + r₁ η φ'(0)` and `|φ'(η)| ≤ r₂ |φ'(0)|`.
#[allow(clippy::too_many_arguments)]
pub fn strong_wolfe_linesearch(
    oracle: &HamiltonianOracle<'_>,
    p: &ProductPoint,
    h0: f64,
    hgrad: &ProductTangent,
    xi: &ProductTangent,
    eta0: f64,
    r1: f64,
    r2: f64,
    use_retraction: bool,
) -> Result<LineSearchOutcome> {
    let slope0 = descent_slope(oracle.geometry(), p, hgrad, xi)?;
    let mut search = Search {
        oracle,
        p,
        xi,
        use_retraction,
        evaluations: 0,
    };
    let sufficient = |t: &Trial| t.h <= h0 + r1 * t.alpha * slope0;
    let curvature = |s: f64| s.abs() <= -r2 * slope0;

    let mut prev = Bracket {
        alpha: 0.0,
        h: h0,
        slope: slope0,
    };
    let mut alpha = eta0;
    let mut first = true;
    let (mut lo, mut hi) = loop {
        if search.evaluations >= MAX_WOLFE_EVALUATIONS {
            return Err(Error::LineSearchFailed {
                evaluations: search.evaluations,
            });
        }
        let trial = search.phi(alpha);
        let mut t = match trial {
            Some(t) if sufficient(&t) && (first || t.h < prev.h) => t,
            other => {
                let h = other.map_or(f64::INFINITY, |t| t.h);
                break (prev, Bracket::upper(alpha, h));
            }
        };
        let Some(s) = search.dphi(&mut t) else {
            break (prev, Bracket::upper(alpha, f64::INFINITY));
        };
        if curvature(s) {
            let n = search.evaluations;
            return Ok(t.into_outcome(n));
        }
        if s >= 0.0 {
            let hi = Bracket::upper(prev.alpha, prev.h);
            break (Bracket::from_trial(&t, s), hi);
        }
        prev = Bracket::from_trial(&t, s);
        alpha *= 2.0;
        first = false;
    };

    loop {
        if search.evaluations >= MAX_WOLFE_EVALUATIONS || (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
            return Err(Error::LineSearchFailed {
                evaluations: search.evaluations,
            });
        }
        let alpha = interpolate(&lo, &hi);
        match search.phi(alpha) {
            Some(mut t) if sufficient(&t) && t.h < lo.h => {
                let Some(s) = search.dphi(&mut t) else {
                    hi = Bracket::upper(alpha, f64::INFINITY);
                    continue;
                };
                if curvature(s) {
                    let n = search.evaluations;
                    return Ok(t.into_outcome(n));
                }
                if s * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = Bracket::upper(lo.alpha, lo.h);
                }
                lo = Bracket::from_trial(&t, s);
            }
            other => {
                hi = Bracket::upper(alpha, other.map_or(f64::INFINITY, |t| t.h));
            }
        }
    }
}

struct Bracket {
    alpha: f64,
    h: f64,
    slope: f64,
}

impl Bracket {
    fn upper(alpha: f64, h: f64) -> Self {
        Self {
            alpha,
            h,
            slope: f64::NAN,
        }
    }

    fn from_trial(t: &Trial, slope: f64) -> Self {
        Self {
            alpha: t.alpha,
            h: t.h,
            slope,
        }
    }
}

/// Safeguarded quadratic interpolation of `φ(lo)`, `φ'(lo)`, `φ(hi)`, falling
/// back to bisection.
fn interpolate(lo: &Bracket, hi: &Bracket) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let w = b - a;
    let mid = a + 0.5 * w;
    if !hi.h.is_finite() || !lo.slope.is_finite() {
        return mid;
    }
    let denom = 2.0 * (hi.h - lo.h - lo.slope * w);
    if !(denom.abs() > 0.0) {
        return mid;
    }
    let cand = a - lo.slope * w * w / denom;
    let (left, right) = (a.min(b), a.max(b));
    let margin = 0.1 * w.abs();
    if cand.is_finite() && cand >= left + margin && cand <= right - margin {
        cand
    } else {
        mid
    }
}
