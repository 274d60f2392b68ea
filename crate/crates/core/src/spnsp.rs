//! Speech / non-speech block: one language's posteriors to frame decisions.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{check_step, DecisionTrack, LanguageSpec, PosteriorMatrix};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A frame is non-speech iff its arg-max PDF is one of the language's
/// non-speech PDFs.
///
/// Row validity is not re-checked here; run
/// [`validate_posteriors`](crate::model::validate_posteriors) beforehand if
/// the input is untrusted.
pub fn decide_frames(m: &PosteriorMatrix, spec: &LanguageSpec) -> Result<DecisionTrack> {
    if m.num_pdfs() != spec.num_pdfs {
        return Err(Error::ColumnCount {
            language: spec.language_id.clone(),
            expected: spec.num_pdfs,
            got: m.num_pdfs(),
        });
    }
    let decisions = m.rows().map(|row| !spec.is_nonspeech(argmax(row))).collect();
    DecisionTrack::new(
        m.utterance_id(),
        spec.language_id.as_str(),
        m.frame_step(),
        decisions,
    )
}

/// Integer ratio between two frame steps, if there is one.
fn integer_ratio(larger: f64, smaller: f64) -> Option<usize> {
    let r = larger / smaller;
    let k = libm::round(r);
    (k >= 1.0 && libm::fabs(r - k) <= 1e-6 * k).then_some(k as usize)
}

/// Moves a track onto another frame grid whose step is an integer multiple
/// or divisor of the current one.
///
/// Upsampling repeats every decision `k` times. Downsampling takes the
/// majority of each block of `k` frames, ties counting as speech; a trailing
/// partial block is voted over the frames it has.
pub fn resample_track(t: &DecisionTrack, target_step: f64) -> Result<DecisionTrack> {
    check_step(target_step)?;
    let from = t.frame_step();
    let ratio_err = Error::StepRatio {
        from,
        to: target_step,
    };
    let decisions: Vec<bool> = if from >= target_step {
        let k = integer_ratio(from, target_step).ok_or(ratio_err)?;
        if k == 1 {
            t.decisions.clone()
        } else {
            t.decisions
                .iter()
                .flat_map(|&d| core::iter::repeat_n(d, k))
                .collect()
        }
    } else {
        let k = integer_ratio(target_step, from).ok_or(ratio_err)?;
        t.decisions
            .chunks(k)
            .map(|block| 2 * block.iter().filter(|&&d| d).count() >= block.len())
            .collect()
    };
    DecisionTrack::new(t.utterance_id.as_str(), t.source_id.as_str(), target_step, decisions)
}
