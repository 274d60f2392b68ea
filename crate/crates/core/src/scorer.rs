//! DetER / FA / Miss / HTER scoring of hypothesis timelines against
//! references, by exact interval arithmetic.
//!
//! FA and Miss are both normalized by the reference speech duration, so
//! DetER = FA + Miss. HTER uses per-class denominators: false alarms over
//! reference non-speech, misses over reference speech.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interval::{intersect, subtract, total_duration, union};
use crate::model::{ScoreReport, Segment, Timeline};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringConfig {
    /// Seconds excluded on both sides of every reference boundary.
    pub collar: f64,
    /// Scored regions per utterance. Utterances absent from the map are not
    /// scored. Without a map, the region is `[0, max(hyp end, ref end)]`.
    pub uem: Option<BTreeMap<String, Timeline>>,
    /// Durations in the report are rounded to this grid (seconds).
    pub resolution: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            collar: 0.0,
            uem: None,
            resolution: 0.001,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.collar >= 0.0 && self.collar.is_finite()) {
            return Err(Error::Config("collar must be >= 0".into()));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::Config("resolution must be > 0".into()));
        }
        Ok(())
    }
}

/// Raw durations accumulated over one or more utterances.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub fa: f64,
    pub miss: f64,
    pub ref_speech: f64,
    pub ref_nonspeech: f64,
}

impl core::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            fa: self.fa + o.fa,
            miss: self.miss + o.miss,
            ref_speech: self.ref_speech + o.ref_speech,
            ref_nonspeech: self.ref_nonspeech + o.ref_nonspeech,
        }
    }
}

impl Tally {
    pub fn report(&self, resolution: f64) -> Result<ScoreReport> {
        let q = |d: f64| libm::round(d / resolution) * resolution;
        ScoreReport::from_durations(q(self.fa), q(self.miss), q(self.ref_speech), q(self.ref_nonspeech))
    }
}

fn collar_zones(reference: &[Segment], collar: f64) -> Vec<Segment> {
    if collar <= 0.0 {
        return Vec::new();
    }
    let zones: Vec<Segment> = reference
        .iter()
        .flat_map(|s| [s.start, s.end])
        .map(|b| Segment::new((b - collar).max(0.0), b + collar))
        .collect();
    union(&zones, &[])
}

/// Durations for one utterance over an explicit scored region.
pub fn tally_region(hyp: &Timeline, reference: &Timeline, region: &[Segment], collar: f64) -> Tally {
    let scored = subtract(region, &collar_zones(reference.segments(), collar));
    let ref_speech = intersect(reference.segments(), &scored);
    let ref_nonspeech = subtract(&scored, reference.segments());
    Tally {
        fa: total_duration(&intersect(hyp.segments(), &ref_nonspeech)),
        miss: total_duration(&subtract(&ref_speech, hyp.segments())),
        ref_speech: total_duration(&ref_speech),
        ref_nonspeech: total_duration(&ref_nonspeech),
    }
}

fn region_for(hyp: &Timeline, reference: &Timeline, cfg: &ScoringConfig) -> Option<Vec<Segment>> {
    match &cfg.uem {
        Some(map) => map
            .get(&reference.utterance_id)
            .map(|t| t.segments().to_vec()),
        None => {
            let end = hyp.end().max(reference.end());
            Some(if end > 0.0 {
                vec![Segment::new(0.0, end)]
            } else {
                Vec::new()
            })
        }
    }
}

fn tally(hyp: &Timeline, reference: &Timeline, cfg: &ScoringConfig) -> Tally {
    region_for(hyp, reference, cfg)
        .map(|region| tally_region(hyp, reference, &region, cfg.collar))
        .unwrap_or_default()
}

/// Scores one hypothesis against one reference.
pub fn score(hyp: &Timeline, reference: &Timeline, cfg: &ScoringConfig) -> Result<ScoreReport> {
    cfg.validate()?;
    tally(hyp, reference, cfg).report(cfg.resolution)
}

/// Pools durations over all reference utterances, then computes the rates
/// once. A reference without a hypothesis counts as entirely missed.
pub fn score_corpus(
    hyps: &BTreeMap<String, Timeline>,
    refs: &BTreeMap<String, Timeline>,
    cfg: &ScoringConfig,
) -> Result<ScoreReport> {
    cfg.validate()?;
    if let Some(unknown) = hyps.keys().find(|k| !refs.contains_key(*k)) {
        return Err(Error::UnknownUtterance(unknown.clone()));
    }
    let total = refs
        .iter()
        .map(|(utt, reference)| match hyps.get(utt) {
            Some(h) => tally(h, reference, cfg),
            None => tally(&Timeline::empty(utt.as_str()), reference, cfg),
        })
        .fold(Tally::default(), |a, b| a + b);
    total.report(cfg.resolution)
}
