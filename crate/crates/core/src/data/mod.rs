//! Synthetic benchmarks, preprocessing, file formats and penalty tuning.

pub mod cv;
pub mod io;
pub mod preprocess;
pub mod synthetic;
