//! Morphology-only ink segmentation on profilometry heightmaps.

pub mod cli;
pub mod error;
pub mod eval;
pub mod hmap_io;
pub mod preprocess;
pub mod report;
pub mod resample;
pub mod segment;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
