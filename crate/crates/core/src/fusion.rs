//! Fusion of per-language decision tracks: majority voting and logistic
//! regression over the concatenated hard decisions.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::DecisionTrack;

/// Source id of majority-vote output.
pub const MV_SOURCE: &str = "mv";
/// Source id of logistic-regression output.
pub const LR_SOURCE: &str = "lr";

fn check_aligned(tracks: &[&DecisionTrack]) -> Result<()> {
    let first = tracks.first().ok_or(Error::NoTracks)?;
    for t in &tracks[1..] {
        if t.len() != first.len() {
            return Err(Error::LengthMismatch(first.len(), t.len()));
        }
        if libm::fabs(t.frame_step() - first.frame_step()) > 1e-12 {
            return Err(Error::StepMismatch(first.frame_step(), t.frame_step()));
        }
    }
    Ok(())
}

/// A frame is speech when at least half of the tracks say so
/// (`2 * votes >= L`).
pub fn majority_vote(tracks: &[DecisionTrack]) -> Result<DecisionTrack> {
    let refs: Vec<&DecisionTrack> = tracks.iter().collect();
    check_aligned(&refs)?;
    let first = &tracks[0];
    let l = tracks.len();
    let decisions = (0..first.len())
        .map(|t| 2 * tracks.iter().filter(|tr| tr.decisions[t]).count() >= l)
        .collect();
    DecisionTrack::new(first.utterance_id.as_str(), MV_SOURCE, first.frame_step(), decisions)
}

/// Half total error rate in percent: the mean of the false-alarm rate over
/// reference non-speech frames and the miss rate over reference speech frames.
pub fn compute_hter(hyp: &DecisionTrack, reference: &DecisionTrack) -> Result<f64> {
    check_aligned(&[reference, hyp])?;
    let mut counts = [[0usize; 2]; 2];
    for (&r, &h) in reference.decisions.iter().zip(&hyp.decisions) {
        counts[usize::from(r)][usize::from(h)] += 1;
    }
    let nonspeech = counts[0][0] + counts[0][1];
    let speech = counts[1][0] + counts[1][1];
    if speech == 0 {
        return Err(Error::SingleClass("speech"));
    }
    if nonspeech == 0 {
        return Err(Error::SingleClass("non-speech"));
    }
    Ok(50.0 * (counts[0][1] as f64 / nonspeech as f64 + counts[1][0] as f64 / speech as f64))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LrModel {
    pub language_order: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LrTrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2_lambda: f64,
    /// Number of uniformly spaced thresholds tried in `[0, 1]`.
    pub threshold_grid: usize,
}

impl Default for LrTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2_lambda: 1e-4,
            threshold_grid: 101,
        }
    }
}

impl LrTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::Config("l2_lambda must be >= 0".into()));
        }
        if self.threshold_grid == 0 {
            return Err(Error::Config("threshold_grid must be positive".into()));
        }
        Ok(())
    }

    fn thresholds(&self) -> impl Iterator<Item = f64> {
        let g = self.threshold_grid;
        (0..g).map(move |i| if g == 1 { 0.5 } else { i as f64 / (g - 1) as f64 })
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x)))
}

/// L2-regularized mean negative log-likelihood over binary feature vectors.
/// Frames with the same feature pattern are pooled, which makes the cost of
/// one evaluation independent of the number of frames.
#[derive(Debug, Clone)]
pub struct LrObjective {
    num_features: usize,
    /// pattern -> (speech frames, non-speech frames)
    patterns: Vec<(Vec<bool>, usize, usize)>,
    num_frames: usize,
    l2_lambda: f64,
}

impl LrObjective {
    pub fn new(num_features: usize, l2_lambda: f64) -> Self {
        Self {
            num_features,
            patterns: Vec::new(),
            num_frames: 0,
            l2_lambda,
        }
    }

    /// Builds the objective from explicit `(features, label)` frames.
    pub fn from_frames<'a>(
        num_features: usize,
        l2_lambda: f64,
        frames: impl IntoIterator<Item = (&'a [bool], bool)>,
    ) -> Self {
        let mut table: BTreeMap<Vec<bool>, (usize, usize)> = BTreeMap::new();
        let mut n = 0;
        for (x, y) in frames {
            let entry = table.entry(x.to_vec()).or_default();
            if y {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
            n += 1;
        }
        Self {
            num_features,
            patterns: table.into_iter().map(|(x, (p, q))| (x, p, q)).collect(),
            num_frames: n,
            l2_lambda,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Total (speech, non-speech) frame counts.
    pub fn class_counts(&self) -> (usize, usize) {
        self.patterns
            .iter()
            .fold((0, 0), |(a, b), (_, p, q)| (a + p, b + q))
    }

    fn logit(&self, x: &[bool], weights: &[f64], bias: f64) -> f64 {
        bias + x
            .iter()
            .zip(weights)
            .filter(|(&xi, _)| xi)
            .map(|(_, w)| w)
            .sum::<f64>()
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let n = self.num_frames.max(1) as f64;
        let nll: f64 = self
            .patterns
            .iter()
            .map(|(x, pos, neg)| {
                let z = self.logit(x, weights, bias);
                *pos as f64 * softplus(-z) + *neg as f64 * softplus(z)
            })
            .sum();
        nll / n + 0.5 * self.l2_lambda * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient with respect to `(weights, bias)`. The bias is not
    /// regularized.
    pub fn gradient(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let n = self.num_frames.max(1) as f64;
        let mut gw = vec![0.0; self.num_features];
        let mut gb = 0.0;
        for (x, pos, neg) in &self.patterns {
            let p = sigmoid(self.logit(x, weights, bias));
            // d/dz of pos * softplus(-z) + neg * softplus(z)
            let dz = (*pos + *neg) as f64 * p - *pos as f64;
            gb += dz;
            for (g, &xi) in gw.iter_mut().zip(x) {
                if xi {
                    *g += dz;
                }
            }
        }
        for (g, w) in gw.iter_mut().zip(weights) {
            *g = *g / n + self.l2_lambda * w;
        }
        (gw, gb / n)
    }

    /// HTER (percent) of thresholding `sigmoid(w.x + b) >= threshold`.
    pub fn hter(&self, weights: &[f64], bias: f64, threshold: f64) -> f64 {
        let (speech, nonspeech) = self.class_counts();
        let (mut fa, mut miss) = (0usize, 0usize);
        for (x, pos, neg) in &self.patterns {
            if sigmoid(self.logit(x, weights, bias)) >= threshold {
                fa += neg;
            } else {
                miss += pos;
            }
        }
        50.0 * (fa as f64 / nonspeech as f64 + miss as f64 / speech as f64)
    }
}

/// Trajectory of a gradient-descent run, for inspection.
#[derive(Debug, Clone, Default)]
pub struct LrTrainLog {
    pub losses: Vec<f64>,
    pub dev_hter: f64,
}

/// Collects `(features, label)` rows in `language_order` from per-utterance
/// track sets.
fn design<'a>(
    tracks: &'a [Vec<DecisionTrack>],
    labels: &'a [DecisionTrack],
) -> Result<(Vec<String>, Vec<(Vec<bool>, bool)>)> {
    if tracks.len() != labels.len() {
        return Err(Error::LengthMismatch(tracks.len(), labels.len()));
    }
    let first = tracks.first().ok_or(Error::NoTracks)?;
    let mut order: Vec<String> = first.iter().map(|t| t.source_id.clone()).collect();
    order.sort();
    let mut rows = Vec::new();
    for (utt, label) in tracks.iter().zip(labels) {
        let ordered = reorder(&order, utt)?;
        let mut all = ordered.clone();
        all.push(label);
        check_aligned(&all)?;
        for t in 0..label.len() {
            rows.push((ordered.iter().map(|tr| tr.decisions[t]).collect(), label.decisions[t]));
        }
    }
    Ok((order, rows))
}

/// Picks the tracks named in `order`, matching by source id.
fn reorder<'a>(order: &[String], tracks: &'a [DecisionTrack]) -> Result<Vec<&'a DecisionTrack>> {
    if let Some(extra) = tracks.iter().find(|t| !order.contains(&t.source_id)) {
        return Err(Error::UnknownLanguage(extra.source_id.clone()));
    }
    order
        .iter()
        .map(|id| {
            tracks
                .iter()
                .find(|t| &t.source_id == id)
                .ok_or_else(|| Error::MissingLanguage(id.clone()))
        })
        .collect()
}

/// Fits the fusion regression on a development set and calibrates its
/// threshold on HTER.
///
/// `tracks[u]` holds one decision track per language for utterance `u` and
/// `labels[u]` its frame-quantized reference. Languages are ordered by id.
pub fn lr_train(
    tracks: &[Vec<DecisionTrack>],
    labels: &[DecisionTrack],
    cfg: &LrTrainConfig,
) -> Result<LrModel> {
    lr_train_with_log(tracks, labels, cfg).map(|(m, _)| m)
}

pub fn lr_train_with_log(
    tracks: &[Vec<DecisionTrack>],
    labels: &[DecisionTrack],
    cfg: &LrTrainConfig,
) -> Result<(LrModel, LrTrainLog)> {
    cfg.validate()?;
    let (order, rows) = design(tracks, labels)?;
    let objective = LrObjective::from_frames(
        order.len(),
        cfg.l2_lambda,
        rows.iter().map(|(x, y)| (x.as_slice(), *y)),
    );
    let (speech, nonspeech) = objective.class_counts();
    if speech == 0 {
        return Err(Error::SingleClass("speech"));
    }
    if nonspeech == 0 {
        return Err(Error::SingleClass("non-speech"));
    }

    let mut weights = vec![0.0; order.len()];
    let mut bias = 0.0;
    let mut log = LrTrainLog::default();
    log.losses.push(objective.loss(&weights, bias));
    for _ in 0..cfg.iterations {
        let (gw, gb) = objective.gradient(&weights, bias);
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= cfg.learning_rate * g;
        }
        bias -= cfg.learning_rate * gb;
        log.losses.push(objective.loss(&weights, bias));
    }

    let mut best = (f64::INFINITY, 0.5);
    for threshold in cfg.thresholds() {
        let h = objective.hter(&weights, bias, threshold);
        if h < best.0 {
            best = (h, threshold);
        }
    }
    log.dev_hter = best.0;
    Ok((
        LrModel {
            language_order: order,
            weights,
            bias,
            threshold: best.1,
        },
        log,
    ))
}

impl LrModel {
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.language_order.len() {
            return Err(Error::Config("weights and language_order differ in length".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn probability(&self, x: &[bool]) -> f64 {
        let z = self.bias
            + x.iter()
                .zip(&self.weights)
                .filter(|(&xi, _)| xi)
                .map(|(_, w)| w)
                .sum::<f64>();
        sigmoid(z)
    }
}

/// Speech iff `sigmoid(w.x + b) >= threshold`. Tracks are matched to the
/// model's languages by source id.
pub fn lr_predict(model: &LrModel, tracks: &[DecisionTrack]) -> Result<DecisionTrack> {
    model.validate()?;
    let ordered = reorder(&model.language_order, tracks)?;
    check_aligned(&ordered)?;
    let first = ordered[0];
    let mut x = vec![false; ordered.len()];
    let decisions = (0..first.len())
        .map(|t| {
            for (xi, tr) in x.iter_mut().zip(&ordered) {
                *xi = tr.decisions[t];
            }
            model.probability(&x) >= model.threshold
        })
        .collect();
    DecisionTrack::new(first.utterance_id.to_string(), LR_SOURCE, first.frame_step(), decisions)
}
