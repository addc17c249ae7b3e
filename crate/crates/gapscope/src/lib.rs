// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats, experiment runners and the command-line front end around
//! `gapscope-core`.

pub mod archive;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixture;
pub mod io;
pub mod manifest;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
