//! Desk-scale multi-lingual acoustic model: a synthetic corpus generator and
//! a multi-task frame classifier (shared trunk, one softmax head per
//! language) trained on a weighted sum of per-language cross-entropies.
//!
//! The model only has to produce per-language posteriors with designated
//! non-speech PDFs; that is all the decision and fusion stages consume.

mod net;
mod synth;
mod train;

pub use net::{
    combine, infer_posteriors, loss_and_gradient, multitask_loss, Example, Head, MultiTaskLoss,
    ToyModelParams,
};
pub use synth::{
    generate_corpus, states_to_timeline, LanguageView, MultiViewUtterance, Split, SynthConfig,
    SynthCorpus, TrainUtterance,
};
pub use train::{run_training, train_step, ToyTrainConfig, TrainState, TrainingLog};
