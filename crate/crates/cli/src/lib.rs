//! Command-line driver for `ncpdrive`: run configuration, checkpoints, the
//! train/evaluate/experiment commands and the steering server.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod server;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CheckpointMeta};
pub use config::RunConfig;
