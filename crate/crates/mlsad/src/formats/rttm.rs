//! RTTM speech segments and UEM scored regions.
//!
//! RTTM lines are written as
//! `SPEAKER <utt> 1 <start> <dur> <NA> <NA> speech <NA> <NA>` with times in
//! seconds to three decimals. On read, segment ends are snapped to the
//! millisecond grid so that written files read back exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use mlsad_core::{Segment, Timeline};

use super::{FormatError, Result};
use crate::fsutil::{read_to_string, write_atomic};

fn snap_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn number(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| FormatError::parse(line, format!("bad {what} `{field}`")))
}

fn group(raw: BTreeMap<String, Vec<Segment>>) -> Result<BTreeMap<String, Timeline>> {
    raw.into_iter()
        .map(|(utt, segs)| {
            let tl = Timeline::new(utt.as_str(), &segs)?;
            Ok((utt, tl))
        })
        .collect()
}

pub fn parse_rttm(text: &str) -> Result<BTreeMap<String, Timeline>> {
    let mut raw: BTreeMap<String, Vec<Segment>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 9 {
            return Err(FormatError::parse(n, format!("expected at least 9 fields, found {}", fields.len())));
        }
        if fields[0] != "SPEAKER" {
            return Err(FormatError::parse(n, format!("unsupported type `{}`", fields[0])));
        }
        let start = number(fields[3], n, "start")?;
        let dur = number(fields[4], n, "duration")?;
        if dur < 0.0 {
            return Err(FormatError::parse(n, format!("negative duration {dur}")));
        }
        if start < 0.0 {
            return Err(FormatError::parse(n, format!("negative start {start}")));
        }
        let end = snap_ms(start + dur);
        let start = snap_ms(start);
        let entry = raw.entry(fields[1].to_string()).or_default();
        if end > start {
            entry.push(Segment::new(start, end));
        }
    }
    group(raw)
}

pub fn format_rttm<'a>(timelines: impl IntoIterator<Item = &'a Timeline>) -> String {
    let mut out = String::new();
    for tl in timelines {
        for s in tl.segments() {
            writeln!(
                out,
                "SPEAKER {} 1 {:.3} {:.3} <NA> <NA> speech <NA> <NA>",
                tl.utterance_id,
                s.start,
                s.end - s.start
            )
            .unwrap();
        }
    }
    out
}

pub fn read_rttm(path: &Path) -> Result<BTreeMap<String, Timeline>> {
    parse_rttm(&read_to_string(path)?)
}

pub fn write_rttm<'a>(path: &Path, timelines: impl IntoIterator<Item = &'a Timeline>) -> Result<()> {
    write_atomic(path, format_rttm(timelines).as_bytes())
}

/// `<utt> <channel> <start> <end>` per line.
pub fn parse_uem(text: &str) -> Result<BTreeMap<String, Timeline>> {
    let mut raw: BTreeMap<String, Vec<Segment>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(FormatError::parse(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let start = number(fields[2], n, "start")?;
        let end = number(fields[3], n, "end")?;
        if !(start >= 0.0 && start < end) {
            return Err(FormatError::parse(n, format!("invalid region ({start}, {end})")));
        }
        raw.entry(fields[0].to_string())
            .or_default()
            .push(Segment::new(start, end));
    }
    group(raw)
}

pub fn format_uem<'a>(regions: impl IntoIterator<Item = &'a Timeline>) -> String {
    let mut out = String::new();
    for tl in regions {
        for s in tl.segments() {
            writeln!(out, "{} 1 {:.3} {:.3}", tl.utterance_id, s.start, s.end).unwrap();
        }
    }
    out
}

pub fn read_uem(path: &Path) -> Result<BTreeMap<String, Timeline>> {
    parse_uem(&read_to_string(path)?)
}

pub fn write_uem<'a>(path: &Path, regions: impl IntoIterator<Item = &'a Timeline>) -> Result<()> {
    write_atomic(path, format_uem(regions).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_line_format() {
        let tl = Timeline::new("u1", &[(0.02, 0.05)]).unwrap();
        assert_eq!(
            format_rttm([&tl]),
            "SPEAKER u1 1 0.020 0.030 <NA> <NA> speech <NA> <NA>\n"
        );
    }

    #[test]
    fn overlapping_lines_merge() {
        let text = "SPEAKER u1 1 0.000 1.000 <NA> <NA> speech <NA> <NA>\n\
                    SPEAKER u1 1 0.500 1.500 <NA> <NA> speech <NA> <NA>\n";
        let map = parse_rttm(text).unwrap();
        assert_eq!(map["u1"].segments(), &[Segment::new(0.0, 2.0)]);
    }

    #[test]
    fn empty_and_malformed() {
        assert!(parse_rttm("").unwrap().is_empty());
        assert!(parse_rttm(";; comment\n\n").unwrap().is_empty());
        let err = parse_rttm("SPEAKER u1 1 0.0 1.0 <NA> <NA> speech <NA> <NA>\nSPEAKER u1 1 0.0\n")
            .unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_rttm("SPEAKER u1 1 1.0 -0.5 <NA> <NA> speech <NA> <NA>"),
            Err(FormatError::Parse { line: 1, .. })
        ));
        assert!(parse_rttm("LEXEME u1 1 1.0 0.5 <NA> <NA> speech <NA> <NA>").is_err());
    }

    #[test]
    fn uem_examples() {
        let m = parse_uem("u1 1 0.0 10.0\n").unwrap();
        assert_eq!(m["u1"].segments(), &[Segment::new(0.0, 10.0)]);
        let m = parse_uem("u1 1 0.0 1.0\nu1 1 5.0 6.0\n").unwrap();
        assert_eq!(m["u1"].segments().len(), 2);
        assert!(matches!(parse_uem("u1 1 3.0 3.0"), Err(FormatError::Parse { line: 1, .. })));
        assert!(parse_uem("u1 1 3.0").is_err());
    }
}
