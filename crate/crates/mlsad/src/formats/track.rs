//! Decision tracks as text: a `#frame_step=<seconds>` header followed by one
//! `0` or `1` per frame.

use std::path::Path;

use mlsad_core::DecisionTrack;

use super::{FormatError, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub fn format_track(t: &DecisionTrack) -> String {
    let mut out = String::with_capacity(24 + 2 * t.len());
    out.push_str(&format!("#frame_step={}\n", t.frame_step()));
    for &d in &t.decisions {
        out.push(if d { '1' } else { '0' });
        out.push('\n');
    }
    out
}

pub fn parse_track(text: &str, utterance_id: &str, source_id: &str) -> Result<DecisionTrack> {
    let mut lines = text.lines();
    let step = lines
        .next()
        .and_then(|h| h.trim().strip_prefix("#frame_step="))
        .ok_or(FormatError::MissingHeader)?;
    let step: f64 = step
        .parse()
        .map_err(|_| FormatError::parse(1, format!("bad frame step `{step}`")))?;
    let mut decisions = Vec::new();
    for (i, line) in lines.enumerate() {
        match line.trim_end_matches('\r') {
            "0" => decisions.push(false),
            "1" => decisions.push(true),
            other => {
                return Err(FormatError::parse(i + 2, format!("expected 0 or 1, found `{other}`")))
            }
        }
    }
    Ok(DecisionTrack::new(utterance_id, source_id, step, decisions)?)
}

pub fn write_track(path: &Path, t: &DecisionTrack) -> Result<()> {
    write_atomic(path, format_track(t).as_bytes())
}

pub fn read_track(path: &Path, utterance_id: &str, source_id: &str) -> Result<DecisionTrack> {
    parse_track(&read_to_string(path)?, utterance_id, source_id)
}
