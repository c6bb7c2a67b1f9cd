//! File formats, configuration and experiment commands around
//! [`aseq_core`]. The `aseq` binary is a thin clap front end over
//! [`commands`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use error::{exit, AppError, AppResult};
