//! Decision engine for an autonomous vehicle crossing an unsignalized
//! intersection next to a possibly malicious vehicle.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`geometry`], [`vehicle`], [`world`] and [`episode`]: path geometry,
//!   discrete-time kinematics and the closed sense/decide/actuate loop.
//! - [`payoff`]: safety, efficiency and comfort payoffs with TTC-adaptive
//!   weighting, plus the malicious-vehicle payoff.
//! - [`game`]: two-player payoff matrices, pure Nash equilibria and the
//!   Nash-proximity reward.
//! - [`tom`]: a discrete Bayesian network solved by variable elimination,
//!   used to infer the target's malice.
//! - [`qlearn`]: tabular Q-learning with epsilon-greedy exploration.
//! - [`decision`], [`scenarios`], [`training`] and [`metrics`]: the composed
//!   decider, the case library, the learning loop and trace-level metrics.
//!
//! File formats, configuration parsing and the command line live in the
//! companion `aseq` crate.

#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod decision;
pub mod episode;
pub mod error;
pub mod game;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod payoff;
pub mod qlearn;
pub mod scenarios;
pub mod tom;
pub mod training;
pub mod vehicle;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{Path, Segment, Vec2};
pub use vehicle::VehicleState;
pub use world::JointState;
