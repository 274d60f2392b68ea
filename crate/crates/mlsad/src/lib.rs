//! File formats, configuration and pipeline orchestration on top of
//! [`mlsad_core`], plus the `mlsad` command-line tool.
//!
//! Formats:
//! - `SPM1` binary posterior matrices with a `.meta.json` sidecar
//! - RTTM speech segments and UEM scored regions
//! - frame decision tracks (`#frame_step=` header, one `0`/`1` per line)
//! - JSON logistic-regression and toy acoustic models

pub mod config;
pub mod formats;
pub mod fsutil;
pub mod pipeline;

pub use formats::FormatError;
