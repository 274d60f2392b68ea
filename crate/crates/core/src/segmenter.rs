//! Temporal smoothing and conversion between frame decisions and segments.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{check_step, DecisionTrack, Segment, Timeline};

/// Slack for comparing durations built from frame counts.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SmoothingConfig {
    /// Median filter width in frames, odd.
    pub median_width: usize,
    /// Segments shorter than this are dropped (seconds).
    pub min_speech_dur: f64,
    /// Gaps shorter than this are bridged (seconds).
    pub min_gap_dur: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            median_width: 11,
            min_speech_dur: 0.2,
            min_gap_dur: 0.1,
        }
    }
}

impl SmoothingConfig {
    /// No filtering and no duration constraints.
    pub const IDENTITY: Self = Self {
        median_width: 1,
        min_speech_dur: 0.0,
        min_gap_dur: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.median_width == 0 || self.median_width % 2 == 0 {
            return Err(Error::Config(alloc::format!(
                "median_width must be odd and >= 1, got {}",
                self.median_width
            )));
        }
        if !(self.min_speech_dur >= 0.0 && self.min_gap_dur >= 0.0) {
            return Err(Error::Config("smoothing durations must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sliding median (majority) filter. Near the edges the window shrinks
/// symmetrically so it stays centred and odd.
pub fn smooth(t: &DecisionTrack, cfg: &SmoothingConfig) -> Result<DecisionTrack> {
    cfg.validate()?;
    let n = t.len();
    let half = cfg.median_width / 2;
    let mut prefix = vec![0usize; n + 1];
    for (i, &d) in t.decisions.iter().enumerate() {
        prefix[i + 1] = prefix[i] + usize::from(d);
    }
    let decisions = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let ones = prefix[i + h + 1] - prefix[i - h];
            2 * ones > 2 * h + 1
        })
        .collect();
    let mut out = t.clone();
    out.decisions = decisions;
    Ok(out)
}

/// Maximal runs of speech frames as `(first_frame, end_frame)` pairs.
fn speech_runs(decisions: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &d) in decisions.iter().enumerate() {
        match (d, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, decisions.len()));
    }
    runs
}

/// Turns speech runs into segments, bridges short gaps, then drops short
/// segments. Bridging runs first so a short pause inside an utterance does not
/// split it into two pieces that would each be dropped.
///
/// The track is used as is; call [`smooth`] first if filtering is wanted.
pub fn track_to_timeline(t: &DecisionTrack, cfg: &SmoothingConfig) -> Result<Timeline> {
    cfg.validate()?;
    let step = t.frame_step();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for run in speech_runs(&t.decisions) {
        match runs.last_mut() {
            Some(last) if ((run.0 - last.1) as f64 * step) + EPS < cfg.min_gap_dur => {
                last.1 = run.1;
            }
            _ => runs.push(run),
        }
    }
    let segments: Vec<Segment> = runs
        .into_iter()
        .filter(|&(s, e)| (e - s) as f64 * step + EPS >= cfg.min_speech_dur)
        .map(|(s, e)| Segment::new(s as f64 * step, e as f64 * step))
        .collect();
    Timeline::new(t.utterance_id.as_str(), &segments)
}

/// Number of frames needed to cover `total_dur`.
pub fn frame_count(total_dur: f64, frame_step: f64) -> usize {
    let n = libm::ceil(total_dur / frame_step - EPS);
    if n > 0.0 {
        n as usize
    } else {
        0
    }
}

/// First frame whose midpoint is at or after `time`.
fn first_frame_at(time: f64, step: f64) -> usize {
    let mid = |t: usize| (t as f64 + 0.5) * step;
    let guess = libm::ceil(time / step - 0.5);
    let mut t = if guess > 0.0 { guess as usize } else { 0 };
    while t > 0 && mid(t - 1) >= time {
        t -= 1;
    }
    while mid(t) < time {
        t += 1;
    }
    t
}

/// Frame-quantizes a timeline: frame `t` is speech iff its midpoint
/// `(t + 0.5) * frame_step` lies inside a segment.
pub fn timeline_to_track(tl: &Timeline, frame_step: f64, total_dur: f64) -> Result<DecisionTrack> {
    check_step(frame_step)?;
    if tl.end() > total_dur + EPS {
        return Err(Error::SegmentBeyondEnd {
            end: tl.end(),
            total: total_dur,
        });
    }
    let n = frame_count(total_dur, frame_step);
    let mut decisions = vec![false; n];
    for seg in tl.segments() {
        let a = first_frame_at(seg.start, frame_step).min(n);
        let b = first_frame_at(seg.end, frame_step).min(n);
        decisions[a..b].fill(true);
    }
    DecisionTrack::new(tl.utterance_id.as_str(), "timeline", frame_step, decisions)
}
