//! M2 annotation format used by GEC corpora.
//!
//! ```text
//! S I likes dogs
//! A 1 2|||SVA|||like|||REQUIRED|||-NONE-|||0
//! ```
//!
//! Blocks are separated by blank lines. A `-1 -1` span with type `noop`
//! marks an annotator who made no changes.

use std::collections::BTreeSet;

use super::{ParallelPair, Provenance, Sentence};
use crate::error::{Error, Result};

const NONE_MARKER: &str = "-NONE-";
const NOOP: &str = "noop";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: i64,
    pub end: i64,
    pub kind: String,
    /// Replacement tokens joined by spaces; empty for deletions.
    pub replacement: String,
    pub annotator: u32,
}

impl Edit {
    pub fn new(start: i64, end: i64, kind: &str, replacement: &str, annotator: u32) -> Self {
        Edit {
            start,
            end,
            kind: kind.to_string(),
            replacement: replacement.to_string(),
            annotator,
        }
    }

    pub fn noop(annotator: u32) -> Self {
        Edit::new(-1, -1, NOOP, "", annotator)
    }

    pub fn is_noop(&self) -> bool {
        self.start == -1 && self.end == -1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct M2Record {
    pub source_tokens: Vec<String>,
    pub edits: Vec<Edit>,
}

impl M2Record {
    pub fn annotators(&self) -> BTreeSet<u32> {
        self.edits.iter().map(|e| e.annotator).collect()
    }

    fn validate(&self, line: usize) -> Result<()> {
        let n = self.source_tokens.len() as i64;
        for ann in self.annotators() {
            let mut last_end = 0;
            for e in self.edits.iter().filter(|e| e.annotator == ann) {
                if e.is_noop() {
                    continue;
                }
                if !(0 <= e.start && e.start <= e.end && e.end <= n) {
                    return Err(Error::Parse {
                        line,
                        message: format!("span {}..{} outside 0..{n}", e.start, e.end),
                    });
                }
                if e.start < last_end {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "annotator {ann} edits overlap or are unsorted at {}",
                            e.start
                        ),
                    });
                }
                last_end = e.end;
            }
        }
        Ok(())
    }
}

pub fn parse_m2(text: &str) -> Result<Vec<M2Record>> {
    let mut records = Vec::new();
    let mut current: Option<(M2Record, usize)> = None;
    let finish = |cur: &mut Option<(M2Record, usize)>, records: &mut Vec<M2Record>| {
        if let Some((rec, line)) = cur.take() {
            rec.validate(line)?;
            records.push(rec);
        }
        Ok::<_, Error>(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            finish(&mut current, &mut records)?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("S ").or(if line == "S" { Some("") } else { None }) {
            finish(&mut current, &mut records)?;
            let source_tokens = rest.split_whitespace().map(str::to_string).collect();
            current = Some((
                M2Record {
                    source_tokens,
                    edits: Vec::new(),
                },
                line_no,
            ));
        } else if let Some(rest) = line.strip_prefix("A ") {
            let (rec, _) = current.as_mut().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "annotation line before any source line".into(),
            })?;
            rec.edits.push(parse_edit(rest, line_no)?);
        } else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unrecognized line `{line}`"),
            });
        }
    }
    finish(&mut current, &mut records)?;
    Ok(records)
}

fn parse_edit(rest: &str, line: usize) -> Result<Edit> {
    let err = |message: String| Error::Parse { line, message };
    let fields: Vec<&str> = rest.split("|||").collect();
    if fields.len() < 3 {
        return Err(err(format!("expected at least 3 `|||` fields, found {}", fields.len())));
    }
    let mut span = fields[0].split_whitespace();
    let mut index = |name: &str| -> Result<i64> {
        let tok = span.next().ok_or_else(|| err(format!("missing span {name}")))?;
        tok.parse()
            .map_err(|_| err(format!("non-integer span {name} `{tok}`")))
    };
    let start = index("start")?;
    let end = index("end")?;
    let replacement = match fields[2].trim() {
        NONE_MARKER => String::new(),
        r => super::normalize(r),
    };
    let annotator = match fields.last() {
        Some(a) if fields.len() >= 6 => a
            .trim()
            .parse()
            .map_err(|_| err(format!("non-integer annotator `{a}`")))?,
        _ => 0,
    };
    Ok(Edit {
        start,
        end,
        kind: fields[1].to_string(),
        replacement,
        annotator,
    })
}

pub fn write_m2(records: &[M2Record]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push('S');
        for t in &rec.source_tokens {
            out.push(' ');
            out.push_str(t);
        }
        out.push('\n');
        for e in &rec.edits {
            let replacement = if e.is_noop() {
                NONE_MARKER
            } else {
                e.replacement.as_str()
            };
            out.push_str(&format!(
                "A {} {}|||{}|||{}|||REQUIRED|||-NONE-|||{}\n",
                e.start, e.end, e.kind, replacement, e.annotator
            ));
        }
        out.push('\n');
    }
    out
}

/// Applies one annotator's corrections to the source tokens, right to left.
/// Returns `None` when the result equals the source.
pub fn apply_edits(record: &M2Record, annotator: u32) -> Option<ParallelPair> {
    let source = Sentence::new(&record.source_tokens.join(" ")).ok()?;
    let mut edits: Vec<&Edit> = record
        .edits
        .iter()
        .filter(|e| e.annotator == annotator && !e.is_noop())
        .collect();
    edits.sort_by_key(|e| (e.start, e.end));
    let mut tokens: Vec<String> = record.source_tokens.clone();
    for e in edits.iter().rev() {
        let replacement = e.replacement.split_whitespace().map(str::to_string);
        tokens.splice(e.start as usize..e.end as usize, replacement);
    }
    let target = Sentence::new(&tokens.join(" ")).ok()?;
    if target == source {
        return None;
    }
    Some(ParallelPair::new(source, target, Provenance::Mtask).expect("mtask pair"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_without_annotations_has_no_edits() {
        let recs = parse_m2("S I like dogs\n").unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].edits.is_empty());
        assert_eq!(recs[0].source_tokens, ["I", "like", "dogs"]);
    }

    #[test]
    fn substitution_edit_is_parsed_field_by_field() {
        let recs = parse_m2("S I likes dogs\nA 1 2|||SVA|||like|||REQUIRED|||-NONE-|||0").unwrap();
        assert_eq!(recs[0].edits, vec![Edit::new(1, 2, "SVA", "like", 0)]);
    }

    #[test]
    fn noop_block() {
        let recs = parse_m2("S Fine .\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n").unwrap();
        assert_eq!(recs[0].edits.len(), 1);
        assert!(recs[0].edits[0].is_noop());
        assert!(apply_edits(&recs[0], 0).is_none());
    }

    #[test]
    fn annotation_before_source_is_rejected() {
        let err = parse_m2("A 0 1|||X|||y|||REQUIRED|||-NONE-|||0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn non_integer_span_reports_line() {
        let err = parse_m2("S a b\n\nS c d\nA x 1|||X|||y|||REQUIRED|||-NONE-|||0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn out_of_range_span_is_rejected() {
        assert!(parse_m2("S a b\nA 1 3|||X|||y|||REQUIRED|||-NONE-|||0\n").is_err());
    }

    #[test]
    fn substitution_applies() {
        let rec = M2Record {
            source_tokens: vec!["I".into(), "likes".into(), "dogs".into()],
            edits: vec![Edit::new(1, 2, "SVA", "like", 0)],
        };
        let pair = apply_edits(&rec, 0).unwrap();
        assert_eq!(pair.source.as_str(), "I likes dogs");
        assert_eq!(pair.target.as_str(), "I like dogs");
        assert_eq!(pair.provenance(), Provenance::Mtask);
    }

    #[test]
    fn edit_order_does_not_matter() {
        let tokens: Vec<String> = "the he go school".split(' ').map(String::from).collect();
        let del = Edit::new(0, 1, "U", "", 0);
        let rep = Edit::new(2, 3, "V", "goes to", 0);
        let forward = M2Record {
            source_tokens: tokens.clone(),
            edits: vec![del.clone(), rep.clone()],
        };
        let backward = M2Record {
            source_tokens: tokens,
            edits: vec![rep, del],
        };
        let a = apply_edits(&forward, 0).unwrap();
        let b = apply_edits(&backward, 0).unwrap();
        assert_eq!(a.target.as_str(), "he goes to school");
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_annotator_is_identity() {
        let rec = M2Record {
            source_tokens: vec!["a".into()],
            edits: vec![Edit::new(0, 1, "X", "b", 0)],
        };
        assert!(apply_edits(&rec, 3).is_none());
    }
}
