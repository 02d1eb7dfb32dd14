//! File formats, property suites and the command-line front end for
//! [`fractscan_core`].

pub mod cli;
pub mod config;
pub mod formats;
pub mod verify;
