//! Pipeline configuration, read from TOML.
//!
//! ```toml
//! frame_step = 0.01
//! jobs = 0                  # 0: one worker per core
//!
//! [[languages]]
//! language_id = "lang1"
//! num_pdfs = 8
//! nonspeech_pdf_ids = [0, 1]
//!
//! [smoothing]
//! median_width = 11
//! min_speech_dur = 0.2
//! min_gap_dur = 0.1
//!
//! [fusion]
//! method = "lr"             # mv | lr | single:<language_id>
//! model = "lr.json"
//!
//! [scoring]
//! collar = 0.0
//! resolution = 0.001
//! uem = "eval.uem"
//! ```
//!
//! `[lr]`, `[synth]` and `[toy]` hold the logistic-regression, corpus and
//! toy-model training settings. Every table is optional. Relative paths are
//! resolved against the directory of the config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mlsad_core::fusion::LrTrainConfig;
use mlsad_core::segmenter::SmoothingConfig;
use mlsad_core::toytrain::{SynthConfig, ToyTrainConfig};
use mlsad_core::LanguageSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FusionMethod {
    Mv,
    Lr,
    Single(String),
}

impl FromStr for FusionMethod {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mv" => Ok(Self::Mv),
            "lr" => Ok(Self::Lr),
            _ => match s.strip_prefix("single:") {
                Some(id) if !id.is_empty() => Ok(Self::Single(id.to_string())),
                _ => Err(ConfigError::Invalid(format!(
                    "unknown fusion method `{s}` (expected mv, lr or single:<language_id>)"
                ))),
            },
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Mv => f.write_str("mv"),
            Self::Lr => f.write_str("lr"),
            Self::Single(id) => write!(f, "single:{id}"),
        }
    }
}

impl Serialize for FusionMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FusionMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub method: FusionMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            method: FusionMethod::Mv,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub collar: f64,
    pub resolution: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uem: Option<PathBuf>,
}

impl Default for ScoringSection {
    fn default() -> Self {
        Self {
            collar: 0.0,
            resolution: 0.001,
            uem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Grid that all tracks are resampled to before fusion (seconds).
    pub frame_step: f64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub languages: Vec<LanguageSpec>,
    pub smoothing: SmoothingConfig,
    pub fusion: FusionSection,
    pub scoring: ScoringSection,
    pub lr: LrTrainConfig,
    pub synth: SynthConfig,
    pub toy: ToyTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        Self {
            frame_step: synth.frame_step,
            jobs: 0,
            languages: synth.language_specs().expect("default synth config is valid"),
            smoothing: SmoothingConfig::default(),
            fusion: FusionSection::default(),
            scoring: ScoringSection::default(),
            lr: LrTrainConfig::default(),
            synth,
            toy: ToyTrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    fn resolve_paths(&mut self, dir: &Path) {
        for p in [&mut self.fusion.model, &mut self.scoring.uem].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.frame_step > 0.0 && self.frame_step.is_finite()) {
            return invalid(format!("frame_step must be positive, got {}", self.frame_step));
        }
        for (i, spec) in self.languages.iter().enumerate() {
            spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if self.languages[..i].iter().any(|s| s.language_id == spec.language_id) {
                return invalid(format!("language `{}` configured twice", spec.language_id));
            }
        }
        if let FusionMethod::Single(id) = &self.fusion.method {
            if self.language(id).is_none() {
                return invalid(format!("fusion method single:{id} names an unconfigured language"));
            }
        }
        let core = |r: mlsad_core::Result<()>| r.map_err(|e| ConfigError::Invalid(e.to_string()));
        core(self.smoothing.validate())?;
        core(self.lr.validate())?;
        core(self.synth.validate())?;
        core(self.toy.validate())?;
        core(self.scoring_config(None).validate())
    }

    pub fn language(&self, id: &str) -> Option<&LanguageSpec> {
        self.languages.iter().find(|s| s.language_id == id)
    }

    /// Scoring settings with the given scored regions.
    pub fn scoring_config(
        &self,
        uem: Option<std::collections::BTreeMap<String, mlsad_core::Timeline>>,
    ) -> mlsad_core::scorer::ScoringConfig {
        mlsad_core::scorer::ScoringConfig {
            collar: self.scoring.collar,
            uem,
            resolution: self.scoring.resolution,
        }
    }
}
