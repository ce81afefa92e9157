//! File formats, training and evaluation drivers, and the command line for
//! the `haan-core` defogging networks.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod image_io;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::TrainConfig;
pub use error::{HaanError, Result};
