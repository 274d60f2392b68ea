//! Speech activity detection from multi-lingual acoustic-model posteriors.
//!
//! Each language's acoustic model emits a posterior per output PDF per frame.
//! A frame is non-speech for that language when its arg-max PDF belongs to the
//! language's non-speech PDF set ([`spnsp`]). Per-language decision tracks are
//! fused by majority voting or by a logistic regression whose threshold is
//! calibrated on half total error rate ([`fusion`]), smoothed and converted to
//! segments ([`segmenter`]), and scored with DetER/FA/Miss ([`scorer`]).
//!
//! [`toytrain`] provides a synthetic multi-lingual corpus and a small
//! multi-task classifier so the whole chain can run without licensed data.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fusion;
pub mod interval;
pub mod model;
pub mod scorer;
pub mod segmenter;
pub mod spnsp;
pub mod toytrain;

pub use error::{Error, Result};
pub use model::{
    normalize_timeline, validate_posteriors, DecisionTrack, LanguageSpec, MultiTaskLossConfig,
    PosteriorMatrix, ScoreReport, Segment, Timeline, Validation,
};
