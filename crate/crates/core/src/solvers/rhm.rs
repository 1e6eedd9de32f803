//! Deterministic Hamiltonian descent: steepest descent, consensus and
//! Fletcher–Reeves conjugate gradient.

use crate::error::{Error, Result};
use crate::hamiltonian::{minmax_from_grad, HamiltonianOracle};
use crate::manifolds::{ProductPoint, ProductTangent};

use super::linesearch::{backtracking_linesearch, strong_wolfe_linesearch};
use super::{consensus_direction, evaluate, Evaluated, Extras, LineSearchInfo, Recorder, SolverConfig, SolverStatus, SolverTrace, StepRule};

/// Result of one outer iteration.
pub(crate) struct Step {
    pub point: ProductPoint,
    pub eval: Evaluated,
    pub step_size: f64,
    pub extras: Extras,
}

/// Shared outer loop: records `p_0`, then calls `step` until the gradient
/// tolerance or the iteration cap is reached. Errors inside `step` end the
/// run with the trace so far.
pub(crate) fn drive(
    oracle: &HamiltonianOracle<'_>,
    p0: &ProductPoint,
    config: &SolverConfig,
    mut step: impl FnMut(usize, &ProductPoint, &Evaluated) -> Result<Step>,
) -> Result<SolverTrace> {
    config.validate()?;
    let problem = oracle.problem();
    let mut rec = Recorder::new(problem, config);
    let mut p = p0.clone();
    let mut ev = evaluate(problem, &p)?;
    rec.push(0, &p, ev.grad_norm, 0.0, Extras::default());
    for t in 0..config.max_iters {
        if ev.grad_norm <= config.grad_tol {
            return Ok(rec.finish(SolverStatus::Converged));
        }
        match step(t, &p, &ev) {
            Ok(s) => {
                rec.push(t + 1, &s.point, s.eval.grad_norm, s.step_size, s.extras);
                p = s.point;
                ev = s.eval;
            }
            Err(e) => return Ok(rec.fail(e)),
        }
    }
    let status = if ev.grad_norm <= config.grad_tol {
        SolverStatus::Converged
    } else {
        SolverStatus::MaxIters
    };
    Ok(rec.finish(status))
}

pub(crate) fn fixed_step(
    oracle: &HamiltonianOracle<'_>,
    p: &ProductPoint,
    direction: &ProductTangent,
    eta: f64,
    use_retraction: bool,
) -> Result<Step> {
    let point = oracle.geometry().step(p, &direction.scale(-eta), use_retraction)?;
    let eval = evaluate(oracle.problem(), &point)?;
    Ok(Step {
        point,
        eval,
        step_size: eta,
        extras: Extras::default(),
    })
}

/// Steepest descent on ℋ: `p_{t+1} = Exp_{p_t}(−η_t grad ℋ(p_t))` with a
/// fixed step or Armijo backtracking.
pub fn rhm_sd(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    if !matches!(config.step, StepRule::Fixed { .. } | StepRule::Armijo { .. }) {
        return Err(Error::InvalidConfig("rhm_sd takes a fixed or armijo step".into()));
    }
    drive(oracle, p0, config, |_, p, ev| {
        let hg = oracle.hamiltonian_grad_from(p, &ev.grad)?;
        match config.step {
            StepRule::Armijo { eta_bar, r1, rho } => {
                let h0 = 0.5 * ev.grad_norm * ev.grad_norm;
                let xi = -&hg;
                let slope0 = oracle.geometry().inner(p, &hg, &xi);
                let ls = backtracking_linesearch(oracle, p, h0, &hg, &xi, eta_bar, r1, rho, config.use_retraction)?;
                Ok(Step {
                    eval: ls.evaluated(),
                    step_size: ls.step,
                    extras: Extras {
                        inner_iters: Some(ls.evaluations),
                        line_search: Some(LineSearchInfo {
                            evaluations: ls.evaluations,
                            h0,
                            slope0,
                            h_new: ls.hamiltonian,
                            slope_new: None,
                        }),
                        ..Extras::default()
                    },
                    point: ls.point,
                })
            }
            StepRule::Fixed { eta } => fixed_step(oracle, p, &hg, eta, config.use_retraction),
            _ => unreachable!("step rule checked above"),
        }
    })
}

/// Consensus descent: `p_{t+1} = Exp_{p_t}(−η (γ v(p_t) + grad ℋ(p_t)))`.
pub fn rhm_con(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    let StepRule::Fixed { eta } = config.step else {
        return Err(Error::InvalidConfig("rhm_con takes a fixed step".into()));
    };
    drive(oracle, p0, config, |_, p, ev| {
        let hg = oracle.hamiltonian_grad_from(p, &ev.grad)?;
        let zeta = consensus_direction(config.gamma, &minmax_from_grad(&ev.grad), &hg);
        fixed_step(oracle, p, &zeta, eta, config.use_retraction)
    })
}

/// Fletcher–Reeves conjugate gradient on ℋ with a strong Wolfe search.
///
/// `ξ_t = −grad ℋ(p_t) + β_t T(ξ_{t−1})`, `β_t = ‖grad ℋ(p_t)‖² / ‖grad ℋ(p_{t−1})‖²`,
/// restarting from `−grad ℋ` whenever `ξ_t` is not a sufficient descent
/// direction.
pub fn rhm_cg(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    let StepRule::StrongWolfe { eta0, r1, r2 } = config.step else {
        return Err(Error::InvalidConfig("rhm_cg takes a strong Wolfe step".into()));
    };
    let geometry = oracle.geometry();
    // Carried between iterations: grad ℋ at the current point, the next
    // direction, and the previous (step, slope) for the initial trial step.
    let mut cached_hgrad: Option<ProductTangent> = None;
    let mut next_dir: Option<ProductTangent> = None;
    let mut previous: Option<(f64, f64)> = None;
    drive(oracle, p0, config, |_, p, ev| {
        let hg = match cached_hgrad.take() {
            Some(hg) => hg,
            None => oracle.hamiltonian_grad_from(p, &ev.grad)?,
        };
        let hg_sq = geometry.inner(p, &hg, &hg);
        let mut xi = next_dir.take().unwrap_or_else(|| -&hg);
        let mut slope = geometry.inner(p, &hg, &xi);
        let mut restarted = false;
        if !(slope <= -1e-12 * hg_sq) {
            xi = -&hg;
            slope = -hg_sq;
            restarted = true;
        }
        let mut trial = match previous {
            Some((alpha, s)) => {
                let guess = alpha * s / slope;
                if guess.is_finite() && guess > 0.0 {
                    guess
                } else {
                    eta0
                }
            }
            None => eta0,
        };
        let h0 = 0.5 * ev.grad_norm * ev.grad_norm;
        let ls = match strong_wolfe_linesearch(oracle, p, h0, &hg, &xi, trial, r1, r2, config.use_retraction) {
            // A transported direction can be badly scaled for the new point
            // (e.g. coupling entries that collapsed); retry along −grad ℋ.
            Err(Error::LineSearchFailed { .. }) if !restarted => {
                xi = -&hg;
                slope = -hg_sq;
                trial = eta0;
                strong_wolfe_linesearch(oracle, p, h0, &hg, &xi, trial, r1, r2, config.use_retraction)?
            }
            other => other?,
        };
        let hg_new = match &ls.hgrad {
            Some(h) => h.clone(),
            None => oracle.hamiltonian_grad_from(&ls.point, &ls.grad)?,
        };
        let beta = geometry.inner(&ls.point, &hg_new, &hg_new) / hg_sq;
        let carried = geometry.transport(p, &ls.point, &xi)?;
        next_dir = Some(carried.scale(beta).axpy(-1.0, &hg_new));
        cached_hgrad = Some(hg_new);
        previous = Some((ls.step, slope));
        Ok(Step {
            eval: ls.evaluated(),
            step_size: ls.step,
            extras: Extras {
                inner_iters: Some(ls.evaluations),
                line_search: Some(LineSearchInfo {
                    evaluations: ls.evaluations,
                    h0,
                    slope0: slope,
                    h_new: ls.hamiltonian,
                    slope_new: ls.slope,
                }),
                ..Extras::default()
            },
            point: ls.point,
        })
    })
}
