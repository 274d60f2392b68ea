//! Seeded synthetic corpus: a two-state speech/non-speech Markov chain per
//! utterance, PDF labels drawn uniformly within the active class, Gaussian
//! features around fixed per-PDF means.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{LanguageSpec, Segment, Timeline};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthConfig {
    pub num_languages: usize,
    pub feature_dim: usize,
    /// Output PDFs per language.
    pub pdfs_per_language: Vec<usize>,
    /// Leading PDFs of each language that model non-speech.
    pub nonspeech_pdfs_per_language: Vec<usize>,
    pub speech_to_nonspeech_prob: f64,
    pub nonspeech_to_speech_prob: f64,
    pub frames_per_utterance: usize,
    /// Training utterances per language.
    pub utterances_per_language: usize,
    /// Utterances in the development split, seen by every language.
    pub dev_utterances: usize,
    /// Utterances in the evaluation split, seen by every language.
    pub eval_utterances: usize,
    /// Norm of every PDF mean.
    pub class_separation: f64,
    /// Feature noise standard deviation per language.
    pub noise_scale: Vec<f64>,
    pub frame_step: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_languages: 3,
            feature_dim: 20,
            pdfs_per_language: vec![8, 7, 6],
            nonspeech_pdfs_per_language: vec![2, 2, 2],
            speech_to_nonspeech_prob: 0.02,
            nonspeech_to_speech_prob: 0.05,
            frames_per_utterance: 400,
            utterances_per_language: 40,
            dev_utterances: 20,
            eval_utterances: 20,
            class_separation: 2.0,
            noise_scale: vec![1.0, 1.2, 1.4],
            frame_step: 0.01,
            seed: 20_210_601,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let l = self.num_languages;
        let bad = |msg: String| Err(Error::Config(msg));
        if l == 0 {
            return bad("num_languages must be positive".into());
        }
        if self.pdfs_per_language.len() != l
            || self.nonspeech_pdfs_per_language.len() != l
            || self.noise_scale.len() != l
        {
            return bad(format!("per-language lists must have {l} entries"));
        }
        for (i, (&d, &k)) in self
            .pdfs_per_language
            .iter()
            .zip(&self.nonspeech_pdfs_per_language)
            .enumerate()
        {
            if k == 0 || k >= d {
                return bad(format!("language {i}: need 0 < non-speech pdfs ({k}) < pdfs ({d})"));
            }
        }
        for p in [self.speech_to_nonspeech_prob, self.nonspeech_to_speech_prob] {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("transition probability {p} outside (0, 1)"));
            }
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.class_separation >= 0.0) || self.noise_scale.iter().any(|s| !(*s >= 0.0)) {
            return bad("class_separation and noise_scale must be >= 0".into());
        }
        if !(self.frame_step > 0.0) {
            return bad("frame_step must be positive".into());
        }
        Ok(())
    }

    pub fn language_ids(&self) -> Vec<String> {
        (1..=self.num_languages).map(|i| format!("lang{i}")).collect()
    }

    pub fn language_specs(&self) -> Result<Vec<LanguageSpec>> {
        self.language_ids()
            .into_iter()
            .zip(self.pdfs_per_language.iter().zip(&self.nonspeech_pdfs_per_language))
            .map(|(id, (&d, &k))| LanguageSpec::with_leading_nonspeech(id, d, k))
            .collect()
    }

    /// Long-run fraction of speech frames of the state chain.
    pub fn stationary_speech_prob(&self) -> f64 {
        self.nonspeech_to_speech_prob / (self.speech_to_nonspeech_prob + self.nonspeech_to_speech_prob)
    }
}

/// Features and PDF labels of one utterance as rendered for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageView {
    /// Row-major `frames x feature_dim`.
    pub features: Vec<f32>,
    pub pdf_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainUtterance {
    pub id: String,
    pub language: usize,
    pub states: Vec<bool>,
    pub view: LanguageView,
}

/// Shared state sequence rendered once per language.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewUtterance {
    pub id: String,
    pub states: Vec<bool>,
    pub reference: Timeline,
    pub views: Vec<LanguageView>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub languages: Vec<LanguageSpec>,
    /// `means[l][j]` is the feature mean of PDF `j` of language `l`.
    pub means: Vec<Vec<Vec<f32>>>,
    pub train: Vec<TrainUtterance>,
    pub dev: Vec<MultiViewUtterance>,
    pub eval: Vec<MultiViewUtterance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Dev => 2,
            Split::Eval => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Independent stream per (purpose, split, utterance, language) so any piece
/// can be regenerated alone.
fn stream_rng(seed: u64, purpose: u64, split: u64, utt: u64, lang: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 60) ^ (split << 56) ^ (utt << 16) ^ lang);
    rng
}

fn pdf_means(cfg: &SynthConfig) -> Vec<Vec<Vec<f32>>> {
    (0..cfg.num_languages)
        .map(|l| {
            let mut rng = stream_rng(cfg.seed, 0, 0, 0, l as u64);
            (0..cfg.pdfs_per_language[l])
                .map(|_| {
                    let v: Vec<f64> = (0..cfg.feature_dim)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect();
                    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>()).max(1e-12);
                    v.iter()
                        .map(|x| (cfg.class_separation * x / norm) as f32)
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn state_sequence(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut states = Vec::with_capacity(cfg.frames_per_utterance);
    let mut speech = rng.random::<f64>() < cfg.stationary_speech_prob();
    for _ in 0..cfg.frames_per_utterance {
        states.push(speech);
        let flip = if speech {
            cfg.speech_to_nonspeech_prob
        } else {
            cfg.nonspeech_to_speech_prob
        };
        if rng.random::<f64>() < flip {
            speech = !speech;
        }
    }
    states
}

fn render(
    cfg: &SynthConfig,
    means: &[Vec<f32>],
    language: usize,
    states: &[bool],
    rng: &mut ChaCha8Rng,
) -> LanguageView {
    let d = cfg.pdfs_per_language[language];
    let k = cfg.nonspeech_pdfs_per_language[language];
    let noise = cfg.noise_scale[language];
    let mut features = Vec::with_capacity(states.len() * cfg.feature_dim);
    let mut pdf_labels = Vec::with_capacity(states.len());
    for &speech in states {
        let pdf = if speech {
            rng.random_range(k..d)
        } else {
            rng.random_range(0..k)
        };
        pdf_labels.push(pdf);
        for &m in &means[pdf] {
            let z: f64 = StandardNormal.sample(rng);
            features.push(m + (noise * z) as f32);
        }
    }
    LanguageView {
        features,
        pdf_labels,
    }
}

/// Reference segments of a state sequence.
pub fn states_to_timeline(id: &str, states: &[bool], step: f64) -> Result<Timeline> {
    let mut segs = Vec::new();
    let mut start = None;
    for (i, &s) in states.iter().chain(core::iter::once(&false)).enumerate() {
        match (s, start) {
            (true, None) => start = Some(i),
            (false, Some(a)) => {
                segs.push(Segment::new(a as f64 * step, i as f64 * step));
                start = None;
            }
            _ => {}
        }
    }
    Timeline::new(id, &segs)
}

fn multi_view(
    cfg: &SynthConfig,
    means: &[Vec<Vec<f32>>],
    split: Split,
    index: usize,
) -> Result<MultiViewUtterance> {
    let id = format!("{}_{:04}", split.name(), index);
    let mut rng = stream_rng(cfg.seed, 1, split.tag(), index as u64, 0);
    let states = state_sequence(cfg, &mut rng);
    let views = (0..cfg.num_languages)
        .map(|l| {
            let mut rng = stream_rng(cfg.seed, 2, split.tag(), index as u64, l as u64);
            render(cfg, &means[l], l, &states, &mut rng)
        })
        .collect();
    Ok(MultiViewUtterance {
        reference: states_to_timeline(&id, &states, cfg.frame_step)?,
        id,
        states,
        views,
    })
}

/// Generates the full corpus. Identical configs give identical corpora.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let means = pdf_means(cfg);
    let ids = cfg.language_ids();
    let mut train = Vec::with_capacity(cfg.num_languages * cfg.utterances_per_language);
    for (l, lang_id) in ids.iter().enumerate() {
        for u in 0..cfg.utterances_per_language {
            let index = (l * cfg.utterances_per_language + u) as u64;
            let mut rng = stream_rng(cfg.seed, 1, Split::Train.tag(), index, 0);
            let states = state_sequence(cfg, &mut rng);
            let mut rng = stream_rng(cfg.seed, 2, Split::Train.tag(), index, l as u64);
            let view = render(cfg, &means[l], l, &states, &mut rng);
            train.push(TrainUtterance {
                id: format!("train_{lang_id}_{u:04}"),
                language: l,
                states,
                view,
            });
        }
    }
    let dev = (0..cfg.dev_utterances)
        .map(|i| multi_view(cfg, &means, Split::Dev, i))
        .collect::<Result<_>>()?;
    let eval = (0..cfg.eval_utterances)
        .map(|i| multi_view(cfg, &means, Split::Eval, i))
        .collect::<Result<_>>()?;
    Ok(SynthCorpus {
        config: cfg.clone(),
        languages: cfg.language_specs()?,
        means,
        train,
        dev,
        eval,
    })
}

impl SynthCorpus {
    pub fn split(&self, split: Split) -> &[MultiViewUtterance] {
        match split {
            Split::Dev => &self.dev,
            Split::Eval => &self.eval,
            Split::Train => &[],
        }
    }
}
