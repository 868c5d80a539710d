//! File formats, experiment runs and the `lwlc` command line on top of
//! [`lwlc_core`].

pub mod cli;
pub mod format;
pub mod harness;
pub mod report;
