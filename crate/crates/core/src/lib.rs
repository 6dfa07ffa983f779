//! Solvers for stochastic Volterra equations with weakly singular kernels
//!
//! ```text
//! x(t) = x0 + ∫_0^t (t-s)^{-α} f(x(s)) ds + ∫_0^t (t-s)^{-β} g(x(s)) dW(s)
//! ```
//!
//! on graded meshes `t_n = T (n/N)^r`: Euler–Maruyama, a fast
//! sum-of-exponentials variant of it, and a Milstein scheme, together with a
//! Monte Carlo harness that measures strong errors and fitted convergence
//! orders against a nested fine-mesh reference.

pub mod error;
pub mod harness;
pub mod mesh;
pub mod noise;
pub mod problem;
pub mod quadrature;
pub mod schemes;
pub mod soe;

pub use error::{Result, SveError};
pub use mesh::{exp_drift_weight, GradedMesh};
pub use noise::{path_seed, sample_path, BrownianPath, Increments};
pub use problem::{
    Affine, ClosureCoefficients, Coefficients, InitialState, SineCosine, SveProblem,
};
pub use schemes::{
    em_solve, em_solve_with, fast_em_solve, fast_em_solve_with, milstein_solve,
    milstein_solve_with, quadrature_oracle, EmWeights, FastEmPlan, MilsteinMode, SchemeKind,
    Trajectory,
};
pub use soe::{build_soe, verify_soe, SoeApprox};
