//! Set algebra on normalized segment lists (sorted, disjoint, half-open).

use alloc::vec::Vec;

use crate::model::Segment;

pub fn total_duration(a: &[Segment]) -> f64 {
    a.iter().map(Segment::duration).sum()
}

pub fn intersect(a: &[Segment], b: &[Segment]) -> Vec<Segment> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let start = a[i].start.max(b[j].start);
        let end = a[i].end.min(b[j].end);
        if start < end {
            out.push(Segment::new(start, end));
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

/// `a` minus `b`.
pub fn subtract(a: &[Segment], b: &[Segment]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut j = 0;
    for seg in a {
        let mut cursor = seg.start;
        while j < b.len() && b[j].end <= cursor {
            j += 1;
        }
        let mut k = j;
        while k < b.len() && b[k].start < seg.end {
            if b[k].start > cursor {
                out.push(Segment::new(cursor, b[k].start));
            }
            cursor = cursor.max(b[k].end);
            k += 1;
        }
        if cursor < seg.end {
            out.push(Segment::new(cursor, seg.end));
        }
    }
    out
}

/// Union of two normalized lists; touching pieces are merged.
pub fn union(a: &[Segment], b: &[Segment]) -> Vec<Segment> {
    let mut all: Vec<Segment> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.start.total_cmp(&y.start));
    let mut out: Vec<Segment> = Vec::with_capacity(all.len());
    for seg in all {
        match out.last_mut() {
            Some(last) if seg.start <= last.end => last.end = last.end.max(seg.end),
            _ => out.push(seg),
        }
    }
    out
}
