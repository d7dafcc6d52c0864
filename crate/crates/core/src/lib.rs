//! Encoder-assisted monitoring for repeated games with noisy private signals.
//!
//! The crate decides whether a public-signal encoder can make monitoring
//! virtually perfect, computes the resulting equilibrium utility region for
//! two-player games, and simulates both the block code and the block
//! grim-trigger protocol built on it.

pub mod codec;
pub mod config;
pub mod constraint;
pub mod deviation;
pub mod error;
pub mod game;
pub mod graph;
pub mod info;
pub mod radix;
pub mod region;
pub mod repeated;
pub mod seed;

pub use error::{Error, Result};
pub use game::{MonitoringStructure, ProductDistribution, StageGame};
pub use info::JointDistribution;
