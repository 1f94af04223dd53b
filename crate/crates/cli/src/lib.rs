//! Command-line surface for the mixbound sampler: experiment drivers,
//! image I/O, configuration resolution and report rendering.

pub mod config;
pub mod experiments;
pub mod pgm;
pub mod report;
pub mod verify;
