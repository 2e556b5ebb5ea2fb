//! Tabular self-play learners for finite-horizon two-player zero-sum Markov
//! games, evaluated against exact best responses.
//!
//! The crate is organised around a plain data model ([`game::MarkovGame`])
//! plus three learner families:
//!
//! * [`ulcb`] — optimistic/pessimistic value iteration with a per-state
//!   general-sum Nash subroutine and count-based confidence bonuses;
//! * [`explore`] — reward-free exploration building a policy cover, followed
//!   by Nash planning on the empirical model;
//! * [`mirror`] — exponential-weights learners for one-step and two-step
//!   turn-based games with importance-weighted value estimates.
//!
//! Matrix-game subroutines (zero-sum LP solve, Lemke–Howson pivoting, support
//! enumeration) live in [`matrix`]. Experiment orchestration, game
//! generators, run logs and the command-line front end live in [`harness`]
//! and [`cli`].
//!
//! Heavy batch loops are data-parallel via rayon when the default `parallel`
//! feature is enabled; disabling it yields a dependency-free sequential
//! build with identical results.

pub mod cli;
mod error;
pub mod exec;
pub mod explore;
pub mod game;
pub mod harness;
pub mod matrix;
pub mod mirror;
mod sample;
pub mod ulcb;

pub use error::{Error, Result};
