//! File formats, parallel sweeps and the command-line front end for
//! [`tcpsim_core`].

pub mod cli;
pub mod config;
pub mod report;
pub mod sweep;
pub mod tracecheck;
