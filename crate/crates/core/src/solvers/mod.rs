//! Iterative methods: the Hamiltonian family (steepest descent, consensus,
//! conjugate gradient, trust region, stochastic variants) and the
//! descent-ascent baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianOracle;
use crate::manifolds::{ProductPoint, ProductTangent};
use crate::problems::MinMaxProblem;

mod baselines;
mod linesearch;
mod rhm;
mod stochastic;
mod trust_region;

pub use baselines::{rceg, rgda};
pub use linesearch::{backtracking_linesearch, curve_velocity, strong_wolfe_linesearch, LineSearchOutcome};
pub use rhm::{rhm_cg, rhm_con, rhm_sd};
pub use stochastic::{draw_batches, rhm_scon, rhm_sgd};
pub use trust_region::rhm_tr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RhmSd,
    RhmCon,
    RhmCg,
    RhmTr,
    RhmSgd,
    RhmScon,
    Rgda,
    Rceg,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::RhmSd,
        Method::RhmCon,
        Method::RhmCg,
        Method::RhmTr,
        Method::RhmSgd,
        Method::RhmScon,
        Method::Rgda,
        Method::Rceg,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::RhmSd => "rhm_sd",
            Method::RhmCon => "rhm_con",
            Method::RhmCg => "rhm_cg",
            Method::RhmTr => "rhm_tr",
            Method::RhmSgd => "rhm_sgd",
            Method::RhmScon => "rhm_scon",
            Method::Rgda => "rgda",
            Method::Rceg => "rceg",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Method::RhmSgd | Method::RhmScon)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown solver `{s}`")))
    }
}

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed { eta: f64 },
    /// `η_t = (2t + 1) / (2δ (t + 1)²)`.
    Decaying { delta: f64 },
    /// Backtracking from `eta_bar` by factor `rho` until the Armijo test
    /// with parameter `r1` holds.
    Armijo { eta_bar: f64, r1: f64, rho: f64 },
    /// Bracketing/zoom search for the strong Wolfe conditions; `eta0` is the
    /// first trial step.
    StrongWolfe { eta0: f64, r1: f64, r2: f64 },
}

impl StepRule {
    pub fn armijo(eta_bar: f64) -> Self {
        StepRule::Armijo { eta_bar, r1: 1e-4, rho: 0.5 }
    }

    pub fn strong_wolfe(eta0: f64) -> Self {
        StepRule::StrongWolfe { eta0, r1: 1e-4, r2: 0.1 }
    }

    /// Step at iteration `t` for the fixed and decaying schedules.
    pub fn scheduled(&self, t: usize) -> Option<f64> {
        match *self {
            StepRule::Fixed { eta } => Some(eta),
            StepRule::Decaying { delta } => {
                let t = t as f64;
                Some((2.0 * t + 1.0) / (2.0 * delta * (t + 1.0) * (t + 1.0)))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match *self {
            StepRule::Fixed { eta } if !(eta >= 0.0) || !eta.is_finite() => bad(format!("step {eta} must be nonnegative")),
            StepRule::Decaying { delta } if !(delta > 0.0) || !delta.is_finite() => {
                bad(format!("decaying schedule needs δ > 0, got {delta}"))
            }
            StepRule::Armijo { eta_bar, r1, rho } => {
                if !(eta_bar > 0.0) || !(r1 > 0.0 && r1 < 1.0) || !(rho > 0.0 && rho < 1.0) {
                    bad(format!("armijo needs η̄ > 0, r1 ∈ (0,1), ϱ ∈ (0,1); got {eta_bar}, {r1}, {rho}"))
                } else {
                    Ok(())
                }
            }
            StepRule::StrongWolfe { eta0, r1, r2 } => {
                if !(eta0 > 0.0) || !(r1 > 0.0 && r1 < r2 && r2 < 1.0) {
                    bad(format!("strong Wolfe needs η₀ > 0 and 0 < r1 < r2 < 1; got {eta0}, {r1}, {r2}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionParams {
    pub delta0: f64,
    pub delta_max: f64,
    pub rho_accept: f64,
    /// Inner truncated-CG cap; `None` means the manifold dimension.
    pub max_inner: Option<usize>,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta_max: 100.0,
            rho_accept: 0.1,
            max_inner: None,
        }
    }
}

/// Evaluation points of the extra-gradient correction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RcegPoints {
    /// Gradient at the extrapolated pair `(w_t, z_t)`.
    #[default]
    Extrapolated,
    /// Both block gradients at the mixed pair `(w_t, y_t)`.
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Stop once `‖grad f‖ ≤ grad_tol`.
    pub grad_tol: f64,
    pub step: StepRule,
    /// Consensus weight for the consensus variants.
    pub gamma: f64,
    pub batch_size: usize,
    pub batch_size_prime: usize,
    pub trust_region: TrustRegionParams,
    pub seed: u64,
    /// Use retractions even where an exponential map exists.
    pub use_retraction: bool,
    pub rceg_points: RcegPoints,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        let step = match method {
            Method::RhmCg => StepRule::strong_wolfe(1.0),
            Method::RhmSd => StepRule::armijo(1.0),
            _ => StepRule::Fixed { eta: 1e-2 },
        };
        Self {
            method,
            max_iters: 1000,
            grad_tol: 1e-10,
            step,
            gamma: 0.5,
            batch_size: 1,
            batch_size_prime: 1,
            trust_region: TrustRegionParams::default(),
            seed: 0,
            use_retraction: false,
            rceg_points: RcegPoints::default(),
            record_iterates: false,
        }
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_batches(mut self, s: usize, s_prime: usize) -> Self {
        self.batch_size = s;
        self.batch_size_prime = s_prime;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn recording_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol = {} must be nonnegative", self.grad_tol)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma = {} must be nonnegative", self.gamma)));
        }
        let tr = &self.trust_region;
        if !(tr.delta0 > 0.0) || !(tr.delta_max >= tr.delta0) || !(tr.rho_accept >= 0.0 && tr.rho_accept < 0.25) {
            return Err(Error::InvalidConfig(
                "trust region needs Δ₀ > 0, Δ_max ≥ Δ₀ and ρ_accept ∈ [0, ¼)".into(),
            ));
        }
        if self.method.is_stochastic() && (self.batch_size == 0 || self.batch_size_prime == 0) {
            return Err(Error::InvalidConfig("batch sizes must be at least 1".into()));
        }
        let allowed = match self.method {
            Method::RhmSd => matches!(self.step, StepRule::Fixed { .. } | StepRule::Armijo { .. }),
            Method::RhmCg => matches!(self.step, StepRule::StrongWolfe { .. }),
            Method::RhmTr => true,
            Method::RhmSgd | Method::RhmScon => matches!(self.step, StepRule::Fixed { .. } | StepRule::Decaying { .. }),
            Method::RhmCon | Method::Rgda | Method::Rceg => matches!(self.step, StepRule::Fixed { .. }),
        };
        if !allowed {
            return Err(Error::InvalidConfig(format!(
                "{} does not support the step rule {:?}",
                self.method, self.step
            )));
        }
        if let (Method::RhmCg, StepRule::StrongWolfe { r2, .. }) = (self.method, self.step) {
            if r2 >= 0.5 {
                return Err(Error::InvalidConfig(format!("conjugate gradient needs r2 < 1/2, got {r2}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
    Error,
}

impl SolverStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::LineSearchFailed => "line_search_failed",
            SolverStatus::Error => "error",
        }
    }
}

/// Line-search bookkeeping of an accepted step, enough to re-check the
/// Armijo and curvature conditions after the fact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchInfo {
    pub evaluations: usize,
    /// `ℋ(p_t)`.
    pub h0: f64,
    /// `⟨grad ℋ(p_t), ξ_t⟩`.
    pub slope0: f64,
    /// `ℋ(p_{t+1})`.
    pub h_new: f64,
    /// `⟨grad ℋ(p_{t+1}), d/dη R_{p_t}(η ξ_t)⟩` at the accepted step.
    pub slope_new: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionInfo {
    /// Radius used for this subproblem.
    pub radius: f64,
    pub model_decrease: f64,
    pub actual_decrease: f64,
    pub rho: f64,
    /// Largest Rayleigh quotient met by the inner solver.
    pub hess_norm_est: f64,
    /// `‖grad ℋ(p_t)‖`.
    pub hgrad_norm: f64,
    pub accepted: bool,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub elapsed_seconds: f64,
    /// Step size that produced this iterate (0 for the initial record).
    pub step_size: f64,
    /// `‖grad f‖ = √(2ℋ)`.
    pub grad_norm: f64,
    pub hamiltonian: f64,
    pub opt_gap: Option<f64>,
    pub inner_iters: Option<usize>,
    pub line_search: Option<LineSearchInfo>,
    pub trust_region: Option<TrustRegionInfo>,
}

#[derive(Debug, Clone)]
pub struct SolverTrace {
    pub method: Method,
    pub records: Vec<TraceRecord>,
    pub status: SolverStatus,
    pub error: Option<Error>,
    /// Iterates `p_0, p_1, …` when the config asks for them.
    pub iterates: Vec<ProductPoint>,
}

impl SolverTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace holds at least the initial record")
    }

    pub fn iterations(&self) -> usize {
        self.last().iter
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.last().grad_norm
    }

    /// Equality of everything except wall-clock times.
    pub fn same_numbers(&self, other: &SolverTrace) -> bool {
        self.method == other.method
            && self.status == other.status
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                let mut b = b.clone();
                b.elapsed_seconds = a.elapsed_seconds;
                bits_eq(a, &b)
            })
    }
}

// Bitwise float comparison so that NaN payloads and signed zeros count.
fn bits_eq(a: &TraceRecord, b: &TraceRecord) -> bool {
    let f = |x: f64, y: f64| x.to_bits() == y.to_bits();
    let o = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => f(x, y),
        (None, None) => true,
        _ => false,
    };
    a.iter == b.iter
        && f(a.step_size, b.step_size)
        && f(a.grad_norm, b.grad_norm)
        && f(a.hamiltonian, b.hamiltonian)
        && o(a.opt_gap, b.opt_gap)
        && a.inner_iters == b.inner_iters
        && a.line_search == b.line_search
        && a.trust_region == b.trust_region
}

/// Accumulates trace records for one run.
pub(crate) struct Recorder<'a> {
    start: Instant,
    problem: &'a dyn MinMaxProblem,
    keep_iterates: bool,
    trace: SolverTrace,
}

/// Per-record extras beyond the core columns.
#[derive(Default)]
pub(crate) struct Extras {
    pub inner_iters: Option<usize>,
    pub line_search: Option<LineSearchInfo>,
    pub trust_region: Option<TrustRegionInfo>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a dyn MinMaxProblem, config: &SolverConfig) -> Self {
        Self {
            start: Instant::now(),
            problem,
            keep_iterates: config.record_iterates,
            trace: SolverTrace {
                method: config.method,
                records: Vec::new(),
                status: SolverStatus::MaxIters,
                error: None,
                iterates: Vec::new(),
            },
        }
    }

    /// Records iterate `p` with gradient norm `grad_norm`.
    pub fn push(&mut self, iter: usize, p: &ProductPoint, grad_norm: f64, step_size: f64, extras: Extras) {
        self.trace.records.push(TraceRecord {
            iter,
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            step_size,
            grad_norm,
            hamiltonian: 0.5 * grad_norm * grad_norm,
            opt_gap: self.problem.opt_gap(p),
            inner_iters: extras.inner_iters,
            line_search: extras.line_search,
            trust_region: extras.trust_region,
        });
        if self.keep_iterates {
            self.trace.iterates.push(p.clone());
        }
    }

    pub fn finish(mut self, status: SolverStatus) -> SolverTrace {
        self.trace.status = status;
        self.trace
    }

    pub fn fail(mut self, err: Error) -> SolverTrace {
        self.trace.status = match err {
            Error::LineSearchFailed { .. } => SolverStatus::LineSearchFailed,
            _ => SolverStatus::Error,
        };
        self.trace.error = Some(err);
        self.trace
    }
}

/// Gradient of `f` at an iterate together with its norm.
#[derive(Clone)]
pub(crate) struct Evaluated {
    pub grad: ProductTangent,
    pub grad_norm: f64,
}

pub(crate) fn evaluate(problem: &dyn MinMaxProblem, p: &ProductPoint) -> Result<Evaluated> {
    let grad = problem.rgrad(p)?;
    let grad_norm = problem.geometry().norm(p, &grad);
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(Evaluated { grad, grad_norm })
}

/// `ζ = γ v + grad ℋ`, exactly `grad ℋ` when `γ = 0`.
pub(crate) fn consensus_direction(gamma: f64, v: &ProductTangent, hgrad: &ProductTangent) -> ProductTangent {
    if gamma == 0.0 {
        hgrad.clone()
    } else {
        hgrad.axpy(gamma, v)
    }
}

/// Runs the solver named by `config.method`.
pub fn run_solver(oracle: &HamiltonianOracle<'_>, p0: &ProductPoint, config: &SolverConfig) -> Result<SolverTrace> {
    match config.method {
        Method::RhmSd => rhm_sd(oracle, p0, config),
        Method::RhmCon => rhm_con(oracle, p0, config),
        Method::RhmCg => rhm_cg(oracle, p0, config),
        Method::RhmTr => rhm_tr(oracle, p0, config),
        Method::RhmSgd => rhm_sgd(oracle, p0, config),
        Method::RhmScon => rhm_scon(oracle, p0, config),
        Method::Rgda => rgda(oracle.problem(), p0, config),
        Method::Rceg => rceg(oracle.problem(), p0, config),
    }
}
