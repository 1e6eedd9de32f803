//! Mini-batch Hamiltonian descent and its consensus variant.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::hamiltonian::{minmax_from_grad, stochastic_hamiltonian_grad, stochastic_minmax_gradient, HamiltonianOracle};
use crate::manifolds::{ProductPoint, ProductTangent};
use crate::rng::{derive_seed, stream};

use super::rhm::{drive, fixed_step};
use super::{consensus_direction, Evaluated, SolverConfig, SolverTrace, StepRule};

/// Independent batches `S`, `S'` for iteration `t`, each drawn without
/// replacement from a counter-based stream of `seed`.
pub fn draw_batches(n: usize, size: usize, size_prime: usize, seed: u64, t: usize) -> (Vec<usize>, Vec<usize>) {
    let iter_seed = derive_seed(seed, t as u64);
    let draw = |k: usize, which: u64| {
        let mut rng = stream(iter_seed, which);
        let mut idx = sample(&mut rng, n, k.min(n)).into_vec();
        idx.sort_unstable();
        idx
    };
    (draw(size, 0), draw(size_prime, 1))
}

fn sample_count(oracle: &HamiltonianOracle<'_>) -> Result<usize> {
    oracle.problem().sample_count().ok_or(Error::NoSampleOracle)
}

fn stochastic_run(
    oracle: &HamiltonianOracle<'_>,
    p0: &ProductPoint,
    config: &SolverConfig,
    gamma: f64,
) -> Result<SolverTrace> {
    if !matches!(config.step, StepRule::Fixed { .. } | StepRule::Decaying { .. }) {
        return Err(Error::InvalidConfig("stochastic solvers take a fixed or decaying step".into()));
    }
    let n = sample_count(oracle)?;
    let full = config.batch_size >= n && config.batch_size_prime >= n;
    let problem = oracle.problem();
    drive(oracle, p0, config, |t, p, ev: &Evaluated| {
        let eta = config.step.scheduled(t).expect("step rule checked above");
        let zeta: ProductTangent = if full {
            let hg = oracle.hamiltonian_grad_from(p, &ev.grad)?;
            consensus_direction(gamma, &minmax_from_grad(&ev.grad), &hg)
        } else {
            let (s, s_prime) = draw_batches(n, config.batch_size, config.batch_size_prime, config.seed, t);
            let hg = stochastic_hamiltonian_grad(oracle, p, &s, &s_prime)?;
            if gamma == 0.0 {
                hg
            } else {
                let v = &stochastic_minmax_gradient(problem, p, &s)? + &stochastic_minmax_gradient(problem, p, &s_prime)?;
                consensus_direction(gamma, &v.scale(0.5), &hg)
            }
        };
        fixed_step(oracle, p, &zeta, eta, config.use_retraction)
    })
}

/// `p_{t+1} = Exp_{p_t}(−η_t grad ℋ_{S,S'}(p_t))` with fresh batches each
/// iteration. Full batches use the deterministic Hamiltonian gradient.
pub fn rhm_sgd(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    stochastic_run(oracle, p0, config, 0.0)
}

/// Stochastic consensus: `ζ = γ (v_S + v_{S'})/2 + grad ℋ_{S,S'}`.
pub fn rhm_scon(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    stochastic_run(oracle, p0, config, config.gamma)
}
