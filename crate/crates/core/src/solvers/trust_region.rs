//! Riemannian trust region on ℋ with a truncated-CG subproblem solver.

use crate::error::{Error, Result};
use crate::hamiltonian::{fd_hvp_with, HamiltonianOracle};
use crate::manifolds::{ProductManifold, ProductPoint, ProductTangent};

use super::rhm::{drive, Step};
use super::{evaluate, Extras, SolverConfig, SolverTrace, TrustRegionInfo};

struct Subproblem {
    eta: ProductTangent,
    model_decrease: f64,
    hess_norm_est: f64,
    inner_iters: usize,
    boundary: bool,
}

// Positive root of ‖η + τδ‖ = Δ.
fn boundary_tau(ee: f64, ed: f64, dd: f64, radius: f64) -> f64 {
    let disc = (ed * ed + dd * (radius * radius - ee)).max(0.0);
    (-ed + disc.sqrt()) / dd
}

/// Steihaug–Toint truncated CG for `min m(η) = ⟨g, η⟩ + ½⟨H η, η⟩` over
/// `‖η‖ ≤ Δ`.
fn truncated_cg(
    geometry: &ProductManifold,
    p: &ProductPoint,
    g: &ProductTangent,
    hess: impl Fn(&ProductTangent) -> Result<ProductTangent>,
    radius: f64,
    max_inner: usize,
) -> Result<Subproblem> {
    let inner = |a: &ProductTangent, b: &ProductTangent| geometry.inner(p, a, b);
    let g_norm = geometry.norm(p, g);
    let tol = g_norm * g_norm.sqrt().min(0.1);

    let mut eta = geometry.zero_tangent(p);
    let mut h_eta = geometry.zero_tangent(p);
    let mut r = g.clone();
    let mut delta = -g;
    let mut r_sq = g_norm * g_norm;
    let mut est: f64 = 0.0;
    let mut boundary = false;
    let mut iters = 0;
    while iters < max_inner {
        iters += 1;
        let hd = hess(&delta)?;
        if !hd.is_finite() {
            return Err(Error::SubproblemBreakdown);
        }
        let kappa = inner(&delta, &hd);
        let dd = inner(&delta, &delta);
        est = est.max(kappa.abs() / dd);
        let ed = inner(&eta, &delta);
        let ee = inner(&eta, &eta);
        let alpha = r_sq / kappa;
        if kappa <= 0.0 || ee + 2.0 * alpha * ed + alpha * alpha * dd >= radius * radius {
            let tau = boundary_tau(ee, ed, dd, radius);
            eta = eta.axpy(tau, &delta);
            h_eta = h_eta.axpy(tau, &hd);
            boundary = true;
            break;
        }
        eta = eta.axpy(alpha, &delta);
        h_eta = h_eta.axpy(alpha, &hd);
        r = r.axpy(alpha, &hd);
        let r_sq_new = inner(&r, &r);
        if r_sq_new.sqrt() <= tol {
            break;
        }
        delta = delta.scale(r_sq_new / r_sq).axpy(-1.0, &r);
        r_sq = r_sq_new;
    }
    if !eta.is_finite() {
        return Err(Error::SubproblemBreakdown);
    }
    let model_decrease = -(inner(g, &eta) + 0.5 * inner(&h_eta, &eta));
    Ok(Subproblem {
        eta,
        model_decrease,
        hess_norm_est: est,
        inner_iters: iters,
        boundary,
    })
}

/// Trust-region method on ℋ. The model Hessian is the covariant finite
/// difference of `grad ℋ` along the inner CG directions.
pub fn rhm_tr(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    let problem = oracle.problem();
    let geometry = oracle.geometry();
    let params = config.trust_region;
    let max_inner = params.max_inner.unwrap_or_else(|| geometry.dim()).max(1);
    let mut radius = params.delta0;
    let mut cached_hgrad: Option<ProductTangent> = None;
    drive(oracle, p0, config, |_, p, ev| {
        let hg = match cached_hgrad.take() {
            Some(hg) => hg,
            None => oracle.hamiltonian_grad_from(p, &ev.grad)?,
        };
        let hgrad_field = |q: &ProductPoint| {
            let g = problem.rgrad(q)?;
            oracle.hamiltonian_grad_from(q, &g)
        };
        let hess = |u: &ProductTangent| fd_hvp_with(geometry, p, u, hgrad_field, Some(&hg), oracle.fd_step());
        let sub = truncated_cg(geometry, p, &hg, hess, radius, max_inner)?;

        let h0 = 0.5 * ev.grad_norm * ev.grad_norm;
        let candidate = geometry
            .step(p, &sub.eta, config.use_retraction)
            .and_then(|q| evaluate(problem, &q).map(|e| (q, e)));
        let (actual, rho) = match &candidate {
            Ok((_, e)) => {
                let actual = h0 - 0.5 * e.grad_norm * e.grad_norm;
                (actual, actual / sub.model_decrease)
            }
            Err(_) => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        let accepted = sub.model_decrease > 0.0 && rho > params.rho_accept;
        let used_radius = radius;
        if !(rho >= 0.25) {
            radius *= 0.25;
        } else if rho > 0.75 && sub.boundary {
            radius = (2.0 * radius).min(params.delta_max);
        }
        let extras = Extras {
            inner_iters: Some(sub.inner_iters),
            trust_region: Some(TrustRegionInfo {
                radius: used_radius,
                model_decrease: sub.model_decrease,
                actual_decrease: actual,
                rho,
                hess_norm_est: sub.hess_norm_est,
                hgrad_norm: geometry.norm(p, &hg),
                accepted,
                boundary: sub.boundary,
            }),
            ..Extras::default()
        };
        match candidate {
            Ok((q, e)) if accepted => Ok(Step {
                point: q,
                eval: e,
                step_size: geometry.norm(p, &sub.eta),
                extras,
            }),
            _ => {
                cached_hgrad = Some(hg);
                Ok(Step {
                    point: p.clone(),
                    eval: ev.clone(),
                    step_size: 0.0,
                    extras,
                })
            }
        }
    })
}
