//! In-memory stages shared by the command-line tool and the end-to-end
//! experiment: decide, fuse, segment, label, score.

use std::collections::BTreeMap;

use log::warn;
use mlsad_core::fusion::{lr_predict, lr_train, majority_vote, LrModel};
use mlsad_core::scorer::{score_corpus, ScoringConfig};
use mlsad_core::segmenter::{smooth, timeline_to_track, track_to_timeline, SmoothingConfig};
use mlsad_core::spnsp::{decide_frames, resample_track};
use mlsad_core::toytrain::{
    generate_corpus, infer_posteriors, run_training, MultiViewUtterance, Split, SynthCorpus,
    ToyModelParams, TrainingLog,
};
use mlsad_core::{
    validate_posteriors, DecisionTrack, Error, LanguageSpec, PosteriorMatrix, Result, ScoreReport,
    Segment, Timeline,
};
use rayon::prelude::*;

use crate::config::{FusionMethod, PipelineConfig};

/// Frame decisions of one posterior matrix. Rows that do not sum to one are
/// logged, not rejected.
pub fn decide(m: &PosteriorMatrix, spec: &LanguageSpec) -> Result<DecisionTrack> {
    let v = validate_posteriors(m, false)?;
    if let Some(&(frame, sum)) = v.row_sum_warnings.first() {
        warn!(
            "{}/{}: {} rows off unit sum (first: frame {frame}, sum {sum:.4})",
            m.language_id(),
            m.utterance_id(),
            v.row_sum_warnings.len()
        );
    }
    decide_frames(m, spec)
}

/// Resamples every track to `frame_step` and fuses them.
///
/// `mv` needs a track from every configured language, `lr` one per language
/// of the model, `single:<id>` only the named one. Tracks from other
/// languages are ignored.
pub fn fuse(
    tracks: &[DecisionTrack],
    method: &FusionMethod,
    model: Option<&LrModel>,
    languages: &[LanguageSpec],
    frame_step: f64,
) -> Result<DecisionTrack> {
    let wanted: Vec<&str> = match method {
        FusionMethod::Mv => languages.iter().map(|l| l.language_id.as_str()).collect(),
        FusionMethod::Lr => model
            .ok_or_else(|| Error::Config("lr fusion needs a model".into()))?
            .language_order
            .iter()
            .map(String::as_str)
            .collect(),
        FusionMethod::Single(id) => vec![id.as_str()],
    };
    let missing: Vec<&str> = wanted
        .iter()
        .copied()
        .filter(|id| !tracks.iter().any(|t| t.source_id == *id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingLanguage(missing.join(", ")));
    }
    let picked: Vec<DecisionTrack> = tracks
        .iter()
        .filter(|t| wanted.contains(&t.source_id.as_str()))
        .map(|t| resample_track(t, frame_step))
        .collect::<Result<_>>()?;
    match method {
        FusionMethod::Mv => majority_vote(&picked),
        FusionMethod::Lr => lr_predict(model.expect("checked above"), &picked),
        FusionMethod::Single(_) => Ok(picked.into_iter().next().expect("checked above")),
    }
}

/// Median smoothing followed by segment extraction.
pub fn segment(track: &DecisionTrack, cfg: &SmoothingConfig) -> Result<Timeline> {
    track_to_timeline(&smooth(track, cfg)?, cfg)
}

/// Frame-quantized reference on the grid of `like`. A missing reference is
/// all non-speech.
pub fn reference_track(reference: Option<&Timeline>, like: &DecisionTrack) -> Result<DecisionTrack> {
    let empty;
    let tl = match reference {
        Some(tl) => tl,
        None => {
            empty = Timeline::empty(like.utterance_id.as_str());
            &empty
        }
    };
    let track = timeline_to_track(tl, like.frame_step(), like.duration())?;
    if track.len() != like.len() {
        return Err(Error::LengthMismatch(like.len(), track.len()));
    }
    Ok(track)
}

/// Trains the fusion regression on per-utterance language tracks and their
/// references.
pub fn train_lr(
    tracks: &BTreeMap<String, Vec<DecisionTrack>>,
    refs: &BTreeMap<String, Timeline>,
    cfg: &PipelineConfig,
) -> Result<LrModel> {
    let mut inputs = Vec::with_capacity(tracks.len());
    let mut labels = Vec::with_capacity(tracks.len());
    for (utt, set) in tracks {
        let set: Vec<DecisionTrack> = set
            .iter()
            .map(|t| resample_track(t, cfg.frame_step))
            .collect::<Result<_>>()?;
        let first = set.first().ok_or(Error::NoTracks)?;
        if !refs.contains_key(utt) {
            warn!("{utt}: no reference segments, treating as non-speech");
        }
        labels.push(reference_track(refs.get(utt), first)?);
        inputs.push(set);
    }
    lr_train(&inputs, &labels, &cfg.lr)
}

/// Regions covering each utterance in full.
pub fn full_regions(utts: &[MultiViewUtterance], frame_step: f64) -> BTreeMap<String, Timeline> {
    utts.iter()
        .map(|u| {
            let end = u.states.len() as f64 * frame_step;
            let tl = Timeline::new(u.id.as_str(), &[Segment::new(0.0, end)]).expect("valid region");
            (u.id.clone(), tl)
        })
        .collect()
}

pub fn references(utts: &[MultiViewUtterance]) -> BTreeMap<String, Timeline> {
    utts.iter().map(|u| (u.id.clone(), u.reference.clone())).collect()
}

/// Posteriors of every utterance of a split, one matrix per language.
pub fn infer_split(
    params: &ToyModelParams,
    corpus: &SynthCorpus,
    split: Split,
) -> Result<Vec<Vec<PosteriorMatrix>>> {
    let step = corpus.config.frame_step;
    corpus
        .split(split)
        .par_iter()
        .map(|u| {
            corpus
                .languages
                .iter()
                .enumerate()
                .map(|(l, spec)| {
                    infer_posteriors(params, &u.views[l].features, l, &u.id, &spec.language_id, step)
                })
                .collect()
        })
        .collect()
}

fn decide_split(
    posteriors: &[Vec<PosteriorMatrix>],
    languages: &[LanguageSpec],
) -> Result<BTreeMap<String, Vec<DecisionTrack>>> {
    posteriors
        .iter()
        .map(|per_lang| {
            let tracks = per_lang
                .iter()
                .zip(languages)
                .map(|(m, spec)| decide(m, spec))
                .collect::<Result<Vec<_>>>()?;
            Ok((per_lang[0].utterance_id().to_string(), tracks))
        })
        .collect()
}

/// Fuses, segments and scores every utterance with one method.
pub fn score_system(
    tracks: &BTreeMap<String, Vec<DecisionTrack>>,
    refs: &BTreeMap<String, Timeline>,
    method: &FusionMethod,
    model: Option<&LrModel>,
    cfg: &PipelineConfig,
    scoring: &ScoringConfig,
) -> Result<ScoreReport> {
    let hyps = tracks
        .iter()
        .map(|(utt, set)| {
            let fused = fuse(set, method, model, &cfg.languages, cfg.frame_step)?;
            Ok((utt.clone(), segment(&fused, &cfg.smoothing)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    score_corpus(&hyps, refs, scoring)
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub training_log: TrainingLog,
    pub lr_model: LrModel,
    /// Single-language systems in language order.
    pub singles: Vec<(String, ScoreReport)>,
    pub mv: ScoreReport,
    pub lr: ScoreReport,
}

impl ExperimentReport {
    /// The single-language system with the lowest DetER.
    pub fn best_single(&self) -> &(String, ScoreReport) {
        self.singles
            .iter()
            .min_by(|a, b| a.1.deter_pct.total_cmp(&b.1.deter_pct))
            .expect("at least one language")
    }
}

/// Synthesizes the corpus, trains the toy model, decodes dev and eval, fits
/// the fusion regression on dev and scores every system on eval. The
/// scored region of each eval utterance is its full length.
pub fn run_experiment(cfg: &PipelineConfig) -> Result<ExperimentReport> {
    let corpus = generate_corpus(&cfg.synth)?;
    if corpus.languages != cfg.languages {
        return Err(Error::Config("languages do not match the synthetic corpus".into()));
    }
    let (params, training_log) = run_training(&corpus, &cfg.toy)?;
    let dev = decide_split(&infer_split(&params, &corpus, Split::Dev)?, &corpus.languages)?;
    let eval = decide_split(&infer_split(&params, &corpus, Split::Eval)?, &corpus.languages)?;

    let lr_model = train_lr(&dev, &references(&corpus.dev), cfg)?;
    let refs = references(&corpus.eval);
    let scoring = cfg.scoring_config(Some(full_regions(&corpus.eval, corpus.config.frame_step)));
    let run = |method: &FusionMethod| score_system(&eval, &refs, method, Some(&lr_model), cfg, &scoring);
    let singles = corpus
        .languages
        .iter()
        .map(|l| {
            let id = l.language_id.clone();
            run(&FusionMethod::Single(id.clone())).map(|r| (id, r))
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        training_log,
        singles,
        mv: run(&FusionMethod::Mv)?,
        lr: run(&FusionMethod::Lr)?,
        lr_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: &str) -> LanguageSpec {
        LanguageSpec::new(id, 2, [0]).unwrap()
    }

    fn track(src: &str, step: f64, bits: &[u8]) -> DecisionTrack {
        DecisionTrack::from_bits("u", src, step, bits).unwrap()
    }

    #[test]
    fn fuse_resamples_and_checks_languages() {
        let langs = [spec("a"), spec("b"), spec("c")];
        let tracks = [
            track("a", 0.03, &[1, 0]),
            track("b", 0.01, &[1, 1, 1, 0, 0, 0]),
            track("c", 0.01, &[0, 0, 0, 0, 0, 1]),
        ];
        let mv = fuse(&tracks, &FusionMethod::Mv, None, &langs, 0.01).unwrap();
        assert_eq!(mv.bits(), [1, 1, 1, 0, 0, 0]);
        let single = fuse(&tracks, &FusionMethod::Single("a".into()), None, &langs, 0.01).unwrap();
        assert_eq!(single.bits(), [1, 1, 1, 0, 0, 0]);
        assert_eq!(single.source_id, "a");

        let err = fuse(&tracks[..1], &FusionMethod::Mv, None, &langs, 0.01).unwrap_err();
        assert_eq!(err, Error::MissingLanguage("b, c".into()));
        assert!(fuse(&tracks, &FusionMethod::Lr, None, &langs, 0.01).is_err());
    }

    #[test]
    fn reference_on_track_grid() {
        let like = track("a", 0.01, &[0; 10]);
        let tl = Timeline::new("u", &[(0.02, 0.05)]).unwrap();
        assert_eq!(reference_track(Some(&tl), &like).unwrap().bits(), [0, 0, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(reference_track(None, &like).unwrap().speech_frames(), 0);
        let late = Timeline::new("u", &[(0.05, 0.2)]).unwrap();
        assert!(reference_track(Some(&late), &like).is_err());
    }
}
