//! Self-similar asymptotics of the fast-reaction Keller–Rubinow model for
//! Liesegang rings.
//!
//! The crate provides the closed-form limit profiles in parabolic similarity
//! coordinates ([`profiles`]), the special functions they need
//! ([`specfun`]), an implicit finite-difference solver for the full model
//! with relay-type precipitation ([`solver`]), the convergence observables
//! computed from a run ([`diagnostics`]), and the command-line front end
//! ([`cli`]).

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod profiles;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use profiles::{ModelParams, Regime, SelfSimilarProfile, TargetProfile};
pub use solver::{build_grid, Grid, Simulation, SolverState};
