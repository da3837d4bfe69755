//! File formats, plotting and the command-line pipeline around `geocv-core`.

pub mod cli;
pub mod io;
pub mod parallel;
pub mod viz;

pub use geocv_core as core;
