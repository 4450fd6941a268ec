//! Radial-curve face analysis toolkit: synthetic 3D face corpora,
//! preprocessing, radial depth features, gender classifiers and the
//! statistical analyses built on top of them.

pub mod cli;
pub mod config;
pub mod curves;
pub mod eval;
pub mod error;
pub mod features;
pub mod geometry;
pub mod learn;
pub mod mesh_io;
pub mod preprocess;
pub mod report;
pub mod synth;
pub mod stats;

pub use error::{Error, Result};
