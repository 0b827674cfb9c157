//! File formats, configuration and orchestration around `passthrough-core`.

pub mod alloc_tuning;
pub mod analysis;
pub mod bench;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod npfw;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use pipeline::{Pipeline, PipelineOutput, StageTiming};
