//! Frontier selection for autonomous exploration with deep Q-networks.
//!
//! The crate is a small, deterministic laboratory: a 2D occupancy-grid world
//! with a perfect range sensor ([`gridworld`]), frontier extraction and
//! scoring ([`frontier`]), a hand-rolled feed-forward network stack
//! ([`neural`]), the four DQN variants and their training loop ([`agent`]),
//! grid planning and pose math ([`planner`]), and the experiment metrics
//! ([`evaluation`]). [`cli`] wires them into the `fdqn` command.

pub mod agent;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod frontier;
pub mod gridworld;
pub mod neural;
pub mod planner;

pub use error::{Error, Result};
