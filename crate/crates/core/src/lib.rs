//! Utility-maximizing rate scheduling for parallel processor-sharing queues
//! whose capacity region and arrival rates switch with a finite-state
//! continuous-time Markov environment.
//!
//! The crate is organised bottom-up:
//!
//! - [`markov_env`]: the environment chain (generator, sample paths, scaling).
//! - [`capacity`]: per-state convex capacity regions given by facet functions.
//! - [`mimo`]: MIMO multiple-access and broadcast regions built from channels.
//! - [`solver`]: the log-barrier / active-set solver behind every rate program.
//! - [`utility`] and [`allocator`]: the scheduling policy `Λ(q, i)`.
//! - [`dual_cost`]: induced costs, the workload fixed point `q*(w, ρ)`.
//! - [`queue_sim`]: exact event-driven simulation of the queues.
//! - [`heavy_traffic`]: the `r`-indexed system sequence and its scalings.
//! - [`rdrs`]: the limiting reflected diffusion with regime switching.
//! - [`config`] and [`experiment`]: configuration documents and batch runs.

pub mod allocator;
pub mod capacity;
pub mod config;
pub mod dual_cost;
pub mod experiment;
pub mod heavy_traffic;
pub mod markov_env;
pub mod mimo;
pub mod queue_sim;
pub mod rdrs;
pub mod rng;
pub mod solver;
pub mod stats;
pub mod utility;
pub mod verify;
