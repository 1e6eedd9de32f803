//! Min-max optimization on Riemannian manifolds by minimizing the Riemannian
//! Hamiltonian `ℋ(p) = ½‖grad f(p)‖²`.
//!
//! The crate provides dense linear algebra helpers, four matrix geometries
//! and their products, benchmark min-max problems, Hamiltonian oracles, and
//! the solver family (steepest descent, consensus, conjugate gradient, trust
//! region, stochastic variants) together with descent-ascent baselines.

pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod manifolds;
pub mod problems;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use hamiltonian::{HamiltonianOracle, HvpMode};
pub use linalg::Mat;
pub use manifolds::{Manifold, ProductManifold, ProductPoint, ProductTangent};
pub use problems::MinMaxProblem;
pub use solvers::{run_solver, Method, SolverConfig, SolverStatus, SolverTrace, StepRule};
