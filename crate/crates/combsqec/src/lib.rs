//! File formats, reports, parallel execution and the command-line front end
//! for strategic quantum error-correcting codes.

pub mod cli;
pub mod format;
pub mod parallel;
pub mod report;

pub use combsqec_core as core;
