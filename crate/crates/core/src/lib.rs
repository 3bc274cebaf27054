//! Smallest enclosing ball of an intersection of balls.
//!
//! The ball of smallest radius containing `B(a_1, r_1) ∩ ... ∩ B(a_m, r_m)`
//! is recovered from a convex quadratic program over the unit simplex
//! ([`simplex_qp`]), gated by the rank of the centers ([`solver`]), and
//! certified through the multipliers of an S-lemma type identity. The
//! [`jnr`] module is a laboratory for the joint numerical range
//! `G(R^n) = {(-g(x), g_1(x), ..., g_m(x))}` behind that reduction, with
//! exact membership tests, and [`sampler`] holds independent oracles used to
//! cross-check the solver.

pub mod error;
pub mod io;
pub mod jnr;
pub mod linalg;
pub mod sampler;
pub mod simplex_qp;
pub mod solver;
pub mod types;

pub use error::{Result, SebError};
pub use types::{
    ball_to_quadratic, eval_quadratic, Ball, Certificate, Instance, RankRegime, Regime, Solution,
    Status, UnitQuadratic,
};
