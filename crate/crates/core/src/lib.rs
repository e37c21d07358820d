//! Fiberwise twisted Kähler–Einstein metrics on torus fibrations over a disk.
//!
//! The family is the product `D × ℂ/(ℤ + τℤ)` carrying a semipositive twist
//! form `β = H + i∂∂̄Φ`. On every fiber the solver finds `ψ` with
//! `ψ_zz̄ + β_zz̄ = e^ψ`; the relative form `ρ = β + i∂∂̄ψ` is then assembled by
//! implicit differentiation in the base variable and its geometry (geodesic
//! curvature, horizontal lift, relative canonical curvature) is checked
//! against the elliptic identity it satisfies on each fiber.
//!
//! [`bergman`] holds the weighted Bergman-kernel approximation of psh weights.

pub mod bergman;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod hermitian;
pub mod solver;
pub mod torus;
pub mod twist;
pub mod verify;

pub use error::{KaeError, Result};
pub use expr::{parse_chart_weight, parse_potential, Expr, PotentialExpr, Wirtinger};
pub use hermitian::HermitianField;
pub use solver::{solve_fiber_ke, solve_linearized, FiberSolution, SolverOptions};
pub use torus::{Field, TorusGrid};
pub use twist::{BackgroundForm, BetaEval, TwistForm};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
