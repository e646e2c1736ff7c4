//! Radial solutions of the gradient-coupled elliptic system
//!
//! ```text
//! Δu = v^p,   Δv = f(|∇u|)
//! ```
//!
//! in a ball or on all of ℝᴺ: integral tests for the existence of boundary
//! blow-up solutions, a blow-up-aware radial shooting solver, explicit blow-up
//! and growth rates, and the two autonomous reductions used to study the
//! behaviour near the boundary and at infinity.

pub mod asymptotics;
pub mod dynsys;
pub mod error;
pub mod figures;
pub mod fit;
pub mod ko_criteria;
pub mod nonlinearity;
pub mod ode;
pub mod quadrature;
pub mod radial;

pub use asymptotics::{
    ball_rates, exact_solution_residual, verify_ball_rates, verify_whole_space, whole_space_rates, BallRates,
    RateCheck, UCase, WholeSpaceRates,
};
pub use dynsys::{EquilibriumReport, StabilityClass, VectorField3};
pub use error::{Error, Result};
pub use ko_criteria::{
    classify_ball, classify_biharmonic, classify_whole_space, Classification, ConvergenceVerdict, Verdict,
};
pub use nonlinearity::{Kind, Nonlinearity};
pub use radial::{integrate, Domain, Params, RadialSolution, Sample, StepControls, Termination};
