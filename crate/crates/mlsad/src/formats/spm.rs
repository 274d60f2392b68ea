//! `SPM1` posterior matrices.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `SPM1`                  |
//! | 4      | 4    | `num_frames` (u32)            |
//! | 8      | 4    | `num_pdfs` (u32)              |
//! | 12     | 4    | `frame_step_us` (u32)         |
//! | 16     | 4·T·D| row-major IEEE-754 f32 values |
//!
//! Utterance id, language id and the non-speech PDF ids live in a JSON
//! sidecar at `<path>.meta.json`.

use std::path::{Path, PathBuf};

use mlsad_core::PosteriorMatrix;
use serde::{Deserialize, Serialize};

use super::{FormatError, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const MAGIC: [u8; 4] = *b"SPM1";
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpmHeader {
    pub num_frames: u32,
    pub num_pdfs: u32,
    pub frame_step_us: u32,
}

impl SpmHeader {
    pub fn frame_step(&self) -> f64 {
        f64::from(self.frame_step_us) / 1e6
    }

    fn payload_len(&self) -> usize {
        self.num_frames as usize * self.num_pdfs as usize * 4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpmMeta {
    pub utterance_id: String,
    pub language_id: String,
    pub nonspeech_pdf_ids: Vec<usize>,
}

/// Converts a frame step in seconds to whole microseconds.
pub fn step_to_us(step: f64) -> Result<u32> {
    let us = (step * 1e6).round();
    if us < 1.0 {
        return Err(FormatError::ZeroFrameStep);
    }
    if us > f64::from(u32::MAX) || ((us - step * 1e6).abs() > 1e-6 * us) {
        return Err(FormatError::FrameStepPrecision(step));
    }
    Ok(us as u32)
}

pub fn encode(m: &PosteriorMatrix) -> Result<Vec<u8>> {
    let too_big = |_| FormatError::parse(0, "matrix dimensions exceed u32");
    let frames = u32::try_from(m.num_frames()).map_err(too_big)?;
    let pdfs = u32::try_from(m.num_pdfs()).map_err(too_big)?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.values().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&pdfs.to_le_bytes());
    out.extend_from_slice(&step_to_us(m.frame_step())?.to_le_bytes());
    for v in m.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_header(bytes: &[u8]) -> Result<SpmHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let header = SpmHeader {
        num_frames: word(4),
        num_pdfs: word(8),
        frame_step_us: word(12),
    };
    if header.frame_step_us == 0 {
        return Err(FormatError::ZeroFrameStep);
    }
    Ok(header)
}

pub fn decode(bytes: &[u8], utterance_id: &str, language_id: &str) -> Result<PosteriorMatrix> {
    let header = decode_header(bytes)?;
    let expected = HEADER_LEN + header.payload_len();
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes {
            extra: bytes.len() - expected,
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(PosteriorMatrix::new(
        utterance_id,
        language_id,
        header.frame_step(),
        header.num_frames as usize,
        header.num_pdfs as usize,
        values,
    )?)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the matrix and its sidecar.
pub fn write_spm(path: &Path, m: &PosteriorMatrix, nonspeech_pdf_ids: &[usize]) -> Result<()> {
    let meta = SpmMeta {
        utterance_id: m.utterance_id().to_string(),
        language_id: m.language_id().to_string(),
        nonspeech_pdf_ids: nonspeech_pdf_ids.to_vec(),
    };
    write_atomic(path, &encode(m)?)?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&meta)?)
}

pub fn read_meta(path: &Path) -> Result<SpmMeta> {
    Ok(serde_json::from_str(&read_to_string(&sidecar_path(path))?)?)
}

pub fn read_spm(path: &Path) -> Result<(PosteriorMatrix, SpmMeta)> {
    let meta = read_meta(path)?;
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let m = decode(&bytes, &meta.utterance_id, &meta.language_id)?;
    Ok((m, meta))
}
