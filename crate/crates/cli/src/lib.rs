//! Configuration, orchestration and export for model provenance runs.
//!
//! A run is a directory produced from one [`config::RunConfig`]. Stages write
//! their artifacts into it and stamp their inputs, so rerunning a stage with
//! unchanged inputs does nothing.

pub mod config;
pub mod pipeline;
pub mod run;
pub mod viz;

pub use config::RunConfig;
pub use run::{Outcome, Run};
