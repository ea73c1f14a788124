//! Perception-aware sampling-based model predictive control for quadrotor
//! navigation in unknown environments, with a closed-loop simulator.
//!
//! The guide in `book/` walks through each module.

pub mod config;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod mapping;
pub mod mppi;
pub mod reference;
pub mod simulation;
pub mod world;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/mapping.md")]
    mod mapping {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/mppi.md")]
    mod mppi {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
