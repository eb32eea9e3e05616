//! Perpetual Dynkin games driven by Lévy processes whose killed extrema have
//! exponential-type laws.
//!
//! The crate solves the linear-payoff game `G₁(x) = x − δ`, `G₂(x) = x + δ`
//! in closed form for Brownian motion with drift, the Cramér–Lundberg process
//! and the two-sided exponential compound Poisson process, and ships a
//! Monte-Carlo oracle that checks the equilibrium independently.

// `!(a < b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod game;
pub mod levy;
pub mod mc;
pub mod wiener_hopf;

pub use error::{Error, Result};
pub use game::{
    solve_game, solve_game_with, ConditionReport, GameConstants, GameSolution, Region,
    SmoothPasting, SolveOptions,
};
pub use levy::{Family, GameSpec, LevyModel, ModelParams};
pub use wiener_hopf::{wh_factors, WienerHopfFactors};
