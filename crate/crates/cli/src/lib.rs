//! Experiment runners, configuration and file formats for the loop-series
//! library.

pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod table;
