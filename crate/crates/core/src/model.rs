//! Shared data types: posteriors, language specs, decision tracks, timelines
//! and score reports.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Allowed deviation of a posterior row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

/// Per-frame PDF posteriors of one utterance under one language's acoustic
/// model. Stored row-major, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    utterance_id: String,
    language_id: String,
    frame_step: f64,
    num_frames: usize,
    num_pdfs: usize,
    values: Vec<f32>,
}

impl PosteriorMatrix {
    pub fn new(
        utterance_id: impl Into<String>,
        language_id: impl Into<String>,
        frame_step: f64,
        num_frames: usize,
        num_pdfs: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if num_pdfs == 0 {
            return Err(Error::NoColumns);
        }
        check_step(frame_step)?;
        if num_frames.checked_mul(num_pdfs) != Some(values.len()) {
            return Err(Error::DimensionMismatch {
                frames: num_frames,
                pdfs: num_pdfs,
                values: values.len(),
            });
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            language_id: language_id.into(),
            frame_step,
            num_frames,
            num_pdfs,
            values,
        })
    }

    /// Builds a matrix from explicit rows. All rows must have the same length.
    pub fn from_rows(
        utterance_id: impl Into<String>,
        language_id: impl Into<String>,
        frame_step: f64,
        rows: &[&[f32]],
    ) -> Result<Self> {
        let num_pdfs = rows.first().map_or(1, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * num_pdfs);
        for row in rows {
            if row.len() != num_pdfs {
                return Err(Error::DimensionMismatch {
                    frames: rows.len(),
                    pdfs: num_pdfs,
                    values: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(utterance_id, language_id, frame_step, rows.len(), num_pdfs, values)
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn language_id(&self) -> &str {
        &self.language_id
    }

    pub fn frame_step(&self) -> f64 {
        self.frame_step
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_pdfs(&self) -> usize {
        self.num_pdfs
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.values[frame * self.num_pdfs..(frame + 1) * self.num_pdfs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.num_pdfs)
    }
}

/// Outcome of a successful [`validate_posteriors`] call. Row-sum violations
/// found in non-strict mode are collected as `(frame, sum)` warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Validation {
    pub row_sum_warnings: Vec<(usize, f64)>,
}

impl Validation {
    pub fn is_clean(&self) -> bool {
        self.row_sum_warnings.is_empty()
    }
}

/// Checks the posterior invariants: entries in `[0, 1]` and rows summing to
/// one within [`ROW_SUM_TOLERANCE`]. With `strict` unset, row-sum violations
/// are reported as warnings instead of errors.
pub fn validate_posteriors(m: &PosteriorMatrix, strict: bool) -> Result<Validation> {
    if m.num_pdfs == 0 {
        return Err(Error::NoColumns);
    }
    if m.values.len() != m.num_frames * m.num_pdfs {
        return Err(Error::DimensionMismatch {
            frames: m.num_frames,
            pdfs: m.num_pdfs,
            values: m.values.len(),
        });
    }
    check_step(m.frame_step)?;
    let mut out = Validation::default();
    for (frame, row) in m.rows().enumerate() {
        let mut sum = 0.0f64;
        for (pdf, &value) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::PosteriorOutOfRange { frame, pdf, value });
            }
            sum += f64::from(value);
        }
        if libm::fabs(sum - 1.0) > ROW_SUM_TOLERANCE {
            if strict {
                return Err(Error::RowSum { frame, sum });
            }
            out.row_sum_warnings.push((frame, sum));
        }
    }
    Ok(out)
}

/// A language's output layout: how many PDFs its head has and which of them
/// model non-speech.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LanguageSpec {
    pub language_id: String,
    pub num_pdfs: usize,
    pub nonspeech_pdf_ids: BTreeSet<usize>,
}

impl LanguageSpec {
    pub fn new(
        language_id: impl Into<String>,
        num_pdfs: usize,
        nonspeech_pdf_ids: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let spec = Self {
            language_id: language_id.into(),
            num_pdfs,
            nonspeech_pdf_ids: nonspeech_pdf_ids.into_iter().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Non-speech PDFs are the first `count` indices.
    pub fn with_leading_nonspeech(
        language_id: impl Into<String>,
        num_pdfs: usize,
        count: usize,
    ) -> Result<Self> {
        Self::new(language_id, num_pdfs, 0..count)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::LanguageSpec {
                language: self.language_id.clone(),
                reason,
            })
        };
        if self.num_pdfs == 0 {
            return fail("num_pdfs must be positive".to_string());
        }
        if self.nonspeech_pdf_ids.is_empty() {
            return fail("non-speech pdf set is empty".to_string());
        }
        if let Some(&id) = self.nonspeech_pdf_ids.iter().find(|&&id| id >= self.num_pdfs) {
            return fail(format!("non-speech pdf {id} out of range 0..{}", self.num_pdfs));
        }
        if self.nonspeech_pdf_ids.len() >= self.num_pdfs {
            return fail("no speech pdf left".to_string());
        }
        Ok(())
    }

    pub fn is_nonspeech(&self, pdf: usize) -> bool {
        self.nonspeech_pdf_ids.contains(&pdf)
    }
}

/// Frame-level speech (`true`) / non-speech (`false`) decisions on a fixed
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrack {
    pub utterance_id: String,
    /// Language id, or the fusion method that produced the track.
    pub source_id: String,
    frame_step: f64,
    pub decisions: Vec<bool>,
}

impl DecisionTrack {
    pub fn new(
        utterance_id: impl Into<String>,
        source_id: impl Into<String>,
        frame_step: f64,
        decisions: Vec<bool>,
    ) -> Result<Self> {
        check_step(frame_step)?;
        Ok(Self {
            utterance_id: utterance_id.into(),
            source_id: source_id.into(),
            frame_step,
            decisions,
        })
    }

    /// Builds a track from 0/1 values; any nonzero value counts as speech.
    pub fn from_bits(
        utterance_id: impl Into<String>,
        source_id: impl Into<String>,
        frame_step: f64,
        bits: &[u8],
    ) -> Result<Self> {
        Self::new(utterance_id, source_id, frame_step, bits.iter().map(|&b| b != 0).collect())
    }

    pub fn frame_step(&self) -> f64 {
        self.frame_step
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.decisions.len() as f64 * self.frame_step
    }

    pub fn bits(&self) -> Vec<u8> {
        self.decisions.iter().map(|&d| u8::from(d)).collect()
    }

    pub fn speech_frames(&self) -> usize {
        self.decisions.iter().filter(|&&d| d).count()
    }
}

/// Half-open time interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

impl From<(f64, f64)> for Segment {
    fn from((start, end): (f64, f64)) -> Self {
        Self { start, end }
    }
}

/// Sorted, non-overlapping, non-touching speech segments of one utterance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    pub utterance_id: String,
    segments: Vec<Segment>,
}

impl Timeline {
    /// Normalizes `raw` and wraps it.
    pub fn new<S: Into<Segment> + Copy>(
        utterance_id: impl Into<String>,
        raw: &[S],
    ) -> Result<Self> {
        let raw: Vec<Segment> = raw.iter().map(|&s| s.into()).collect();
        Ok(Self {
            utterance_id: utterance_id.into(),
            segments: normalize_timeline(&raw)?,
        })
    }

    pub fn empty(utterance_id: impl Into<String>) -> Self {
        Self {
            utterance_id: utterance_id.into(),
            segments: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

/// Sorts intervals and merges those that overlap or touch.
pub fn normalize_timeline(raw: &[Segment]) -> Result<Vec<Segment>> {
    if let Some(bad) = raw
        .iter()
        .find(|s| !(s.start >= 0.0 && s.start < s.end && s.end.is_finite()))
    {
        return Err(Error::Interval {
            start: bad.start,
            end: bad.end,
        });
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let mut out: Vec<Segment> = Vec::with_capacity(sorted.len());
    for seg in sorted {
        match out.last_mut() {
            Some(last) if seg.start <= last.end => last.end = last.end.max(seg.end),
            _ => out.push(seg),
        }
    }
    Ok(out)
}

/// Detection scores plus the durations they derive from. All percentages
/// except HTER share the reference-speech denominator, so `deter_pct` is
/// `fa_pct + miss_pct`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreReport {
    pub fa_duration: f64,
    pub miss_duration: f64,
    pub ref_speech_duration: f64,
    pub ref_nonspeech_duration: f64,
    pub fa_pct: f64,
    pub miss_pct: f64,
    pub deter_pct: f64,
    /// `None` when the scored region has no reference non-speech.
    pub hter_pct: Option<f64>,
}

impl ScoreReport {
    pub fn from_durations(
        fa_duration: f64,
        miss_duration: f64,
        ref_speech_duration: f64,
        ref_nonspeech_duration: f64,
    ) -> Result<Self> {
        if ref_speech_duration <= 0.0 {
            return Err(Error::NoReferenceSpeech);
        }
        let fa_pct = 100.0 * fa_duration / ref_speech_duration;
        let miss_pct = 100.0 * miss_duration / ref_speech_duration;
        let hter_pct = (ref_nonspeech_duration > 0.0).then(|| {
            50.0 * (fa_duration / ref_nonspeech_duration + miss_duration / ref_speech_duration)
        });
        Ok(Self {
            fa_duration,
            miss_duration,
            ref_speech_duration,
            ref_nonspeech_duration,
            fa_pct,
            miss_pct,
            deter_pct: fa_pct + miss_pct,
            hter_pct,
        })
    }
}

/// Per-language weights of the multi-task objective, in model language order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiTaskLossConfig {
    pub language_weights: Vec<(String, f64)>,
}

impl MultiTaskLossConfig {
    pub fn new(language_weights: Vec<(String, f64)>) -> Result<Self> {
        let cfg = Self { language_weights };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Weight `1/L` for each language.
    pub fn uniform<S: AsRef<str>>(language_ids: &[S]) -> Self {
        let w = 1.0 / language_ids.len().max(1) as f64;
        Self {
            language_weights: language_ids
                .iter()
                .map(|id| (id.as_ref().to_string(), w))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .language_weights
            .iter()
            .any(|(_, w)| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::Config("language weights must be finite and >= 0".into()));
        }
        if !self.language_weights.iter().any(|(_, w)| *w > 0.0) {
            return Err(Error::Config("at least one language weight must be positive".into()));
        }
        Ok(())
    }

    pub fn num_languages(&self) -> usize {
        self.language_weights.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.language_weights.iter().map(|(_, w)| *w).collect()
    }
}

pub(crate) fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::FrameStep(step))
    }
}
