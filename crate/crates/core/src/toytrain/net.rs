//! Shared tanh trunk with one softmax head per language.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{MultiTaskLossConfig, PosteriorMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub num_pdfs: usize,
    /// Row-major `hidden x num_pdfs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModelParams {
    pub feature_dim: usize,
    pub hidden: usize,
    /// Row-major `feature_dim x hidden`.
    pub trunk_weights: Vec<f64>,
    pub trunk_bias: Vec<f64>,
    pub heads: Vec<Head>,
}

/// One language-tagged utterance of a minibatch.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub language: usize,
    /// Row-major `frames x feature_dim`.
    pub features: &'a [f32],
    pub pdf_labels: &'a [usize],
}

impl ToyModelParams {
    /// Glorot-uniform trunk; heads start near zero so that untrained outputs
    /// are close to uniform.
    pub fn init(feature_dim: usize, hidden: usize, pdfs: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize, limit: f64| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-limit..limit)).collect()
        };
        let trunk_limit = libm::sqrt(6.0 / (feature_dim + hidden) as f64);
        let trunk_weights = uniform(feature_dim * hidden, trunk_limit);
        let heads = pdfs
            .iter()
            .map(|&d| Head {
                num_pdfs: d,
                weights: uniform(hidden * d, 0.1 * libm::sqrt(6.0 / (hidden + d) as f64)),
                bias: vec![0.0; d],
            })
            .collect();
        Self {
            feature_dim,
            hidden,
            trunk_weights,
            trunk_bias: vec![0.0; hidden],
            heads,
        }
    }

    /// Same shapes, every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            feature_dim: self.feature_dim,
            hidden: self.hidden,
            trunk_weights: vec![0.0; self.trunk_weights.len()],
            trunk_bias: vec![0.0; self.hidden],
            heads: self
                .heads
                .iter()
                .map(|h| Head {
                    num_pdfs: h.num_pdfs,
                    weights: vec![0.0; h.weights.len()],
                    bias: vec![0.0; h.num_pdfs],
                })
                .collect(),
        }
    }

    pub fn num_languages(&self) -> usize {
        self.heads.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trunk_weights.len() != self.feature_dim * self.hidden
            || self.trunk_bias.len() != self.hidden
        {
            return bad("trunk shape mismatch".into());
        }
        for (l, h) in self.heads.iter().enumerate() {
            if h.weights.len() != self.hidden * h.num_pdfs || h.bias.len() != h.num_pdfs {
                return bad(format!("head {l} shape mismatch"));
            }
        }
        if !self.groups().iter().all(|(_, g)| g.iter().all(|x| x.is_finite())) {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    /// Named parameter groups in a fixed order.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("trunk.weights".into(), &self.trunk_weights),
            ("trunk.bias".into(), &self.trunk_bias),
        ];
        for (l, h) in self.heads.iter().enumerate() {
            out.push((format!("head{l}.weights"), &h.weights));
            out.push((format!("head{l}.bias"), &h.bias));
        }
        out
    }

    pub fn groups_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.trunk_weights, &mut self.trunk_bias];
        for h in &mut self.heads {
            out.push(&mut h.weights);
            out.push(&mut h.bias);
        }
        out
    }

    fn hidden_layer(&self, x: &[f32], out: &mut [f64]) {
        out.copy_from_slice(&self.trunk_bias);
        for (f, &xf) in x.iter().enumerate() {
            let xf = f64::from(xf);
            let row = &self.trunk_weights[f * self.hidden..(f + 1) * self.hidden];
            for (o, w) in out.iter_mut().zip(row) {
                *o += xf * w;
            }
        }
        for o in out.iter_mut() {
            *o = libm::tanh(*o);
        }
    }

    /// Softmax probabilities of `head` for hidden activations `h`.
    fn head_output(&self, head: &Head, h: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&head.bias);
        for (j, &hj) in h.iter().enumerate() {
            let row = &head.weights[j * head.num_pdfs..(j + 1) * head.num_pdfs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += hj * w;
            }
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = libm::exp(*o - max);
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }

    fn check_example(&self, ex: &Example) -> Result<usize> {
        let head = self
            .heads
            .get(ex.language)
            .ok_or_else(|| Error::UnknownLanguage(format!("#{}", ex.language)))?;
        if ex.features.len() != ex.pdf_labels.len() * self.feature_dim {
            return Err(Error::DimensionMismatch {
                frames: ex.pdf_labels.len(),
                pdfs: self.feature_dim,
                values: ex.features.len(),
            });
        }
        if let Some(&bad) = ex.pdf_labels.iter().find(|&&p| p >= head.num_pdfs) {
            return Err(Error::Config(format!("pdf label {bad} out of range")));
        }
        Ok(ex.pdf_labels.len())
    }
}

/// Per-language mean frame cross-entropy and their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskLoss {
    pub total: f64,
    pub per_language: Vec<f64>,
    pub frames_per_language: Vec<usize>,
}

/// `total = sum_l alpha_l * F_l`, where `F_l` is the mean negative log
/// probability of the true PDF over language `l`'s frames in the batch
/// (zero when the batch has none).
pub fn combine(per_language: &[f64], loss_cfg: &MultiTaskLossConfig) -> f64 {
    per_language
        .iter()
        .zip(&loss_cfg.language_weights)
        .map(|(f, (_, a))| a * f)
        .sum()
}

fn frame_counts(params: &ToyModelParams, batch: &[Example]) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; params.num_languages()];
    for ex in batch {
        counts[ex.language] += params.check_example(ex)?;
    }
    Ok(counts)
}

fn check_weights(params: &ToyModelParams, loss_cfg: &MultiTaskLossConfig) -> Result<()> {
    if loss_cfg.num_languages() != params.num_languages() {
        return Err(Error::Config(format!(
            "{} language weights for {} heads",
            loss_cfg.num_languages(),
            params.num_languages()
        )));
    }
    Ok(())
}

pub fn multitask_loss(
    params: &ToyModelParams,
    batch: &[Example],
    loss_cfg: &MultiTaskLossConfig,
) -> Result<MultiTaskLoss> {
    check_weights(params, loss_cfg)?;
    let counts = frame_counts(params, batch)?;
    let mut sums = vec![0.0; params.num_languages()];
    let mut h = vec![0.0; params.hidden];
    for ex in batch {
        let head = &params.heads[ex.language];
        let mut p = vec![0.0; head.num_pdfs];
        for (x, &label) in ex.features.chunks_exact(params.feature_dim).zip(ex.pdf_labels) {
            params.hidden_layer(x, &mut h);
            params.head_output(head, &h, &mut p);
            sums[ex.language] -= libm::log(p[label]);
        }
    }
    let per_language: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok(MultiTaskLoss {
        total: combine(&per_language, loss_cfg),
        per_language,
        frames_per_language: counts,
    })
}

/// Loss together with its analytic gradient. Head `l` only accumulates
/// gradient from language-`l` frames, scaled by `alpha_l / N_l`; the trunk
/// receives the sum over all languages.
pub fn loss_and_gradient(
    params: &ToyModelParams,
    batch: &[Example],
    loss_cfg: &MultiTaskLossConfig,
) -> Result<(MultiTaskLoss, ToyModelParams)> {
    check_weights(params, loss_cfg)?;
    let counts = frame_counts(params, batch)?;
    let alphas = loss_cfg.weights();
    let mut grad = params.zeros_like();
    let mut sums = vec![0.0; params.num_languages()];
    let hdim = params.hidden;
    let mut h = vec![0.0; hdim];
    let mut dh = vec![0.0; hdim];
    for ex in batch {
        let l = ex.language;
        let head = &params.heads[l];
        let d = head.num_pdfs;
        let scale = alphas[l] / counts[l] as f64;
        let mut p = vec![0.0; d];
        for (x, &label) in ex.features.chunks_exact(params.feature_dim).zip(ex.pdf_labels) {
            params.hidden_layer(x, &mut h);
            params.head_output(head, &h, &mut p);
            sums[l] -= libm::log(p[label]);
            if scale == 0.0 {
                continue;
            }
            // d loss / d logits
            p[label] -= 1.0;
            for v in p.iter_mut() {
                *v *= scale;
            }
            let g = &mut grad.heads[l];
            for (gb, &v) in g.bias.iter_mut().zip(&p) {
                *gb += v;
            }
            for j in 0..hdim {
                let row = &head.weights[j * d..(j + 1) * d];
                let grow = &mut g.weights[j * d..(j + 1) * d];
                let mut acc = 0.0;
                for ((gw, &w), &v) in grow.iter_mut().zip(row).zip(&p) {
                    *gw += h[j] * v;
                    acc += w * v;
                }
                dh[j] = acc * (1.0 - h[j] * h[j]);
            }
            for (gb, &v) in grad.trunk_bias.iter_mut().zip(&dh) {
                *gb += v;
            }
            for (f, &xf) in x.iter().enumerate() {
                let xf = f64::from(xf);
                let grow = &mut grad.trunk_weights[f * hdim..(f + 1) * hdim];
                for (gw, &v) in grow.iter_mut().zip(&dh) {
                    *gw += xf * v;
                }
            }
        }
    }
    let per_language: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    Ok((
        MultiTaskLoss {
            total: combine(&per_language, loss_cfg),
            per_language,
            frames_per_language: counts,
        },
        grad,
    ))
}

/// Per-frame posteriors of one utterance under head `language`.
pub fn infer_posteriors(
    params: &ToyModelParams,
    features: &[f32],
    language: usize,
    utterance_id: &str,
    language_id: &str,
    frame_step: f64,
) -> Result<PosteriorMatrix> {
    let head = params
        .heads
        .get(language)
        .ok_or_else(|| Error::UnknownLanguage(String::from(language_id)))?;
    if features.len() % params.feature_dim != 0 {
        return Err(Error::DimensionMismatch {
            frames: features.len() / params.feature_dim,
            pdfs: params.feature_dim,
            values: features.len(),
        });
    }
    let frames = features.len() / params.feature_dim;
    let mut values = Vec::with_capacity(frames * head.num_pdfs);
    let mut h = vec![0.0; params.hidden];
    let mut p = vec![0.0; head.num_pdfs];
    for x in features.chunks_exact(params.feature_dim) {
        params.hidden_layer(x, &mut h);
        params.head_output(head, &h, &mut p);
        values.extend(p.iter().map(|&v| v as f32));
    }
    PosteriorMatrix::new(utterance_id, language_id, frame_step, frames, head.num_pdfs, values)
}
