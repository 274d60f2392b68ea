use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{loss_and_gradient, multitask_loss, Example, ToyModelParams};
use super::synth::SynthCorpus;
use crate::error::{Error, Result};
use crate::model::MultiTaskLossConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ToyModelParams,
    pub loss_cfg: MultiTaskLossConfig,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub epoch: u64,
    pub step: u64,
    /// Last observed minibatch loss per language (zero until seen).
    pub running_loss: Vec<f64>,
}

impl TrainState {
    pub fn new(
        params: ToyModelParams,
        loss_cfg: MultiTaskLossConfig,
        learning_rate: f64,
        minibatch_size: usize,
    ) -> Self {
        let l = params.num_languages();
        Self {
            params,
            loss_cfg,
            learning_rate,
            minibatch_size,
            epoch: 0,
            step: 0,
            running_loss: alloc::vec![0.0; l],
        }
    }
}

/// One plain gradient-descent update on a minibatch.
pub fn train_step(mut state: TrainState, batch: &[Example]) -> Result<TrainState> {
    let (loss, grad) = loss_and_gradient(&state.params, batch, &state.loss_cfg)?;
    if !loss.total.is_finite() {
        return Err(Error::Diverged {
            epoch: state.epoch,
            step: state.step,
        });
    }
    let lr = state.learning_rate;
    for (p, g) in state.params.groups_mut().into_iter().zip(grad.groups()) {
        for (pi, gi) in p.iter_mut().zip(g.1) {
            *pi -= lr * gi;
        }
    }
    for (l, (&f, &n)) in loss
        .per_language
        .iter()
        .zip(&loss.frames_per_language)
        .enumerate()
    {
        if n > 0 {
            state.running_loss[l] = f;
        }
    }
    state.step += 1;
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ToyTrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Utterances per minibatch; languages are mixed at random.
    pub minibatch_size: usize,
    /// Per-language loss weights; uniform `1/L` when absent.
    pub language_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            epochs: 20,
            learning_rate: 0.5,
            minibatch_size: 8,
            language_weights: None,
            seed: 7,
        }
    }
}

impl ToyTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.minibatch_size == 0 {
            return Err(Error::Config("hidden and minibatch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        Ok(())
    }

    pub fn loss_config(&self, language_ids: &[String]) -> Result<MultiTaskLossConfig> {
        match &self.language_weights {
            None => Ok(MultiTaskLossConfig::uniform(language_ids)),
            Some(w) if w.len() == language_ids.len() => {
                MultiTaskLossConfig::new(language_ids.iter().cloned().zip(w.iter().copied()).collect())
            }
            Some(w) => Err(Error::Config(alloc::format!(
                "{} language weights for {} languages",
                w.len(),
                language_ids.len()
            ))),
        }
    }
}

/// Full-pass training loss per language, recorded after each epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub language_ids: Vec<String>,
    /// `losses[e][l]`: mean cross-entropy of language `l` after epoch `e`
    /// (`e = 0` is before training).
    pub losses: Vec<Vec<f64>>,
}

impl TrainingLog {
    /// `(epoch, language_id, loss)` rows.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &str, f64)> + '_ {
        self.losses.iter().enumerate().flat_map(move |(e, per)| {
            self.language_ids
                .iter()
                .zip(per)
                .map(move |(id, &loss)| (e, id.as_str(), loss))
        })
    }
}

fn train_examples(corpus: &SynthCorpus) -> Vec<Example<'_>> {
    corpus
        .train
        .iter()
        .map(|u| Example {
            language: u.language,
            features: &u.view.features,
            pdf_labels: &u.view.pdf_labels,
        })
        .collect()
}

/// Trains the multi-task model on the corpus training split.
pub fn run_training(
    corpus: &SynthCorpus,
    cfg: &ToyTrainConfig,
) -> Result<(ToyModelParams, TrainingLog)> {
    cfg.validate()?;
    let ids: Vec<String> = corpus.languages.iter().map(|l| l.language_id.clone()).collect();
    let loss_cfg = cfg.loss_config(&ids)?;
    let pdfs: Vec<usize> = corpus.languages.iter().map(|l| l.num_pdfs).collect();
    let params = ToyModelParams::init(corpus.config.feature_dim, cfg.hidden, &pdfs, cfg.seed);
    let examples = train_examples(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_ba7c4);
    let mut state = TrainState::new(params, loss_cfg, cfg.learning_rate, cfg.minibatch_size);
    let uniform = MultiTaskLossConfig::uniform(&ids);

    let mut log = TrainingLog {
        language_ids: ids.clone(),
        losses: Vec::with_capacity(cfg.epochs + 1),
    };
    log.losses.push(multitask_loss(&state.params, &examples, &uniform)?.per_language);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=cfg.epochs {
        state.epoch = epoch as u64;
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i]).collect();
            state = train_step(state, &batch)?;
        }
        let epoch_loss = multitask_loss(&state.params, &examples, &uniform)?;
        if !epoch_loss.per_language.iter().all(|f| f.is_finite()) {
            return Err(Error::Diverged {
                epoch: state.epoch,
                step: state.step,
            });
        }
        log.losses.push(epoch_loss.per_language);
    }
    Ok((state.params, log))
}
