//! Descent-ascent baselines that follow the min-max gradient
//! `v = (grad_x f, −grad_y f)` directly.

use crate::error::{Error, Result};
use crate::hamiltonian::{minmax_from_grad, HamiltonianOracle};
use crate::manifolds::ProductPoint;
use crate::problems::MinMaxProblem;

use super::rhm::{drive, fixed_step, Step};
use super::{evaluate, Extras, RcegPoints, SolverConfig, SolverTrace, StepRule};

fn fixed_eta(config: &SolverConfig, name: &str) -> Result<f64> {
    match config.step {
        StepRule::Fixed { eta } => Ok(eta),
        _ => Err(Error::InvalidConfig(format!("{name} takes a fixed step"))),
    }
}

/// Simultaneous descent-ascent:
/// `x_{t+1} = Exp_{x_t}(−η grad_x f)`, `y_{t+1} = Exp_{y_t}(η grad_y f)`.
pub fn rgda(problem: &dyn MinMaxProblem, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    let eta = fixed_eta(config, "rgda")?;
    let oracle = HamiltonianOracle::new(problem);
    drive(&oracle, p0, config, |_, p, ev| {
        fixed_step(&oracle, p, &minmax_from_grad(&ev.grad), eta, config.use_retraction)
    })
}

/// Corrected extra-gradient:
/// `(w, z) = Exp_p(−η v(p))`, then
/// `p_{t+1} = Exp_{(w,z)}(−η v(q) + Log_{(w,z)}(p))` with `q = (w, z)` or,
/// for [`RcegPoints::Mixed`], `q = (w, y_t)`.
///
/// Needs a logarithm on every factor.
pub fn rceg(problem: &dyn MinMaxProblem, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    let eta = fixed_eta(config, "rceg")?;
    let geometry = problem.geometry();
    if let Some(f) = geometry.factors().iter().find(|f| !f.has_log()) {
        return Err(Error::LogUnavailable(f.name()));
    }
    let oracle = HamiltonianOracle::new(problem);
    drive(&oracle, p0, config, |_, p, ev| {
        let first = minmax_from_grad(&ev.grad).scale(-eta);
        let w = geometry.step(p, &first, config.use_retraction)?;
        let probe = match config.rceg_points {
            RcegPoints::Extrapolated => w.clone(),
            RcegPoints::Mixed => {
                let mut q = p.clone();
                q.parts[0] = w.parts[0].clone();
                q
            }
        };
        let v_probe = minmax_from_grad(&problem.rgrad(&probe)?);
        let back = geometry.log(&w, p)?;
        let correction = back.axpy(-eta, &v_probe);
        let point = geometry.step(&w, &correction, config.use_retraction)?;
        let eval = evaluate(problem, &point)?;
        Ok(Step {
            point,
            eval,
            step_size: eta,
            extras: Extras::default(),
        })
    })
}
