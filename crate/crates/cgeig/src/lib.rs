//! File formats, configuration and the run harness around `cgeig-core`.

pub mod config;
pub mod error;
pub mod guess;
pub mod harness;
pub mod mtx;
pub mod trace;

pub use cgeig_core as core;
pub use error::{HarnessError, Result};
