//! Recovery of motion parts and screw-axis motion attributes of articulated
//! objects from segmented point-cloud sequences.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod init;
pub mod optimizer;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
