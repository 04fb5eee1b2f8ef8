//! Distributed event-triggered flocking of Euler-Lagrange agents.
//!
//! Agents sense relative positions continuously and broadcast their velocity
//! only when a local trigger fires. The crate provides the communication
//! graph, agent plants (double integrator and an SE(3) underwater vehicle),
//! the inter-agent potential, the trigger and control laws, a deterministic
//! fixed-step simulator with runtime monitors, metrics, and the `etflock` CLI.

pub mod cli;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod potential;
pub mod scenario;
pub mod simulator;
pub mod trigger;

pub use error::{FlockError, Result};
