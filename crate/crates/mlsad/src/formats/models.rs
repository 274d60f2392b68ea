//! JSON model files and the CSV training log.

use std::path::Path;

use mlsad_core::fusion::LrModel;
use mlsad_core::toytrain::{Head, ToyModelParams, TrainingLog};
use serde::{Deserialize, Serialize};

use super::{FormatError, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub fn write_lr_model(path: &Path, model: &LrModel) -> Result<()> {
    model.validate()?;
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_lr_model(path: &Path) -> Result<LrModel> {
    let model: LrModel = serde_json::from_str(&read_to_string(path)?)?;
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    fn new(shape: &[usize], data: &[f64]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: data.to_vec(),
        }
    }

    fn take(self, shape: &[usize], name: &str) -> Result<Vec<f64>> {
        let n: usize = self.shape.iter().product();
        if self.shape != shape || n != self.data.len() {
            return Err(FormatError::parse(
                0,
                format!(
                    "{name}: shape {:?} with {} values, expected {shape:?}",
                    self.shape,
                    self.data.len()
                ),
            ));
        }
        Ok(self.data)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    language_id: Option<String>,
    weights: Array,
    bias: Array,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyModelDto {
    feature_dim: usize,
    hidden: usize,
    language_ids: Vec<String>,
    trunk: LayerDto,
    heads: Vec<LayerDto>,
}

/// Writes the parameters with the language id of each head.
pub fn write_toy_model(path: &Path, params: &ToyModelParams, language_ids: &[String]) -> Result<()> {
    params.validate()?;
    if language_ids.len() != params.heads.len() {
        return Err(FormatError::parse(
            0,
            format!("{} heads but {} language ids", params.heads.len(), language_ids.len()),
        ));
    }
    let (f, h) = (params.feature_dim, params.hidden);
    let dto = ToyModelDto {
        feature_dim: f,
        hidden: h,
        language_ids: language_ids.to_vec(),
        trunk: LayerDto {
            language_id: None,
            weights: Array::new(&[f, h], &params.trunk_weights),
            bias: Array::new(&[h], &params.trunk_bias),
        },
        heads: params
            .heads
            .iter()
            .zip(language_ids)
            .map(|(hd, id)| LayerDto {
                language_id: Some(id.clone()),
                weights: Array::new(&[h, hd.num_pdfs], &hd.weights),
                bias: Array::new(&[hd.num_pdfs], &hd.bias),
            })
            .collect(),
    };
    let mut text = serde_json::to_string(&dto)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Returns the parameters and the language id of each head.
pub fn read_toy_model(path: &Path) -> Result<(ToyModelParams, Vec<String>)> {
    let dto: ToyModelDto = serde_json::from_str(&read_to_string(path)?)?;
    let (f, h) = (dto.feature_dim, dto.hidden);
    if dto.heads.len() != dto.language_ids.len() {
        return Err(FormatError::parse(0, "heads and language_ids differ in length"));
    }
    let mut heads = Vec::with_capacity(dto.heads.len());
    for (layer, id) in dto.heads.into_iter().zip(&dto.language_ids) {
        if layer.language_id.as_ref().is_some_and(|l| l != id) {
            return Err(FormatError::parse(0, format!("head order does not match language `{id}`")));
        }
        let d = layer.bias.shape.first().copied().unwrap_or(0);
        heads.push(Head {
            num_pdfs: d,
            weights: layer.weights.take(&[h, d], "head weights")?,
            bias: layer.bias.take(&[d], "head bias")?,
        });
    }
    let params = ToyModelParams {
        feature_dim: f,
        hidden: h,
        trunk_weights: dto.trunk.weights.take(&[f, h], "trunk weights")?,
        trunk_bias: dto.trunk.bias.take(&[h], "trunk bias")?,
        heads,
    };
    params.validate()?;
    Ok((params, dto.language_ids))
}

pub fn format_training_log(log: &TrainingLog) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| FormatError::parse(0, e.to_string());
    w.write_record(["epoch", "language_id", "loss"]).map_err(csv_err)?;
    for (epoch, id, loss) in log.rows() {
        w.write_record([epoch.to_string(), id.to_string(), loss.to_string()])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::parse(0, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_training_log(path: &Path, log: &TrainingLog) -> Result<()> {
    write_atomic(path, format_training_log(log)?.as_bytes())
}
