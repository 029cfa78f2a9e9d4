//! Multi-agent joint search-and-track simulation library.
//!
//! A team of mobile agents covers a rectangular arena while an unknown,
//! time-varying number of targets appears, moves and disappears. Each agent
//! runs a sequential-Monte-Carlo multi-Bernoulli filter over range-bearing
//! measurements; a joint optimizer assigns every agent a mode (search or
//! track) and a control action each step by minimizing a weighted sum of a
//! coverage cost and a tracking cost. The crate provides the world models,
//! the filter, the objectives, the genetic-algorithm and exhaustive solvers,
//! an OSPA evaluation metric and a scenario runner with CSV/JSON outputs.

pub mod controller;
pub mod metrics;
pub mod models;
pub mod objectives;
pub mod rfs;
pub mod rng;
pub mod runner;
