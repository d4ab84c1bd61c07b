//! Per-recording annotation files: one `start end crackle wheeze` row per cycle.

use super::{EventClass, LabeledEvent, Provenance};
use crate::error::{Error, Result};

/// Returns one annotated wheeze per row whose wheeze flag is 1. Crackle-only
/// rows are skipped.
pub fn parse_annotations(recording_id: &str, text: &str) -> Result<Vec<LabeledEvent>> {
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("{what} is not a number: {s:?}"),
            })
        };
        let flag = |s: &str, what: &str| -> Result<bool> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::Parse {
                    line: line_no,
                    message: format!("{what} must be 0 or 1, found {s:?}"),
                }),
            }
        };
        let start = num(fields[0], "start")?;
        let end = num(fields[1], "end")?;
        let _crackle = flag(fields[2], "crackle flag")?;
        let wheeze = flag(fields[3], "wheeze flag")?;
        if end <= start {
            return Err(Error::Parse {
                line: line_no,
                message: format!("end {end} is not after start {start}"),
            });
        }
        if start < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("negative start {start}"),
            });
        }
        if wheeze {
            events.push(LabeledEvent {
                recording_id: recording_id.to_string(),
                start,
                end,
                class: EventClass::Wheeze,
                provenance: Provenance::Annotated,
            });
        }
    }
    Ok(events)
}

/// Writes wheeze events back in the four-column layout.
pub fn serialize_annotations(events: &[LabeledEvent]) -> String {
    events
        .iter()
        .map(|e| {
            let wheeze = u8::from(e.class == EventClass::Wheeze);
            format!("{}\t{}\t0\t{}\n", e.start, e.end, wheeze)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wheeze_row_becomes_event() {
        let ev = parse_annotations("r", "0.5 1.2 0 1").unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start, ev[0].end), (0.5, 1.2));
        assert_eq!(ev[0].class, EventClass::Wheeze);
        assert_eq!(ev[0].provenance, Provenance::Annotated);
    }

    #[test]
    fn crackle_only_row_ignored() {
        assert!(parse_annotations("r", "0.5 1.2 1 0").unwrap().is_empty());
        assert_eq!(parse_annotations("r", "0.5 1.2 1 1\n\n2.0 3.0 0 0\n").unwrap().len(), 1);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_annotations("r", "0.1 0.2 0 1\n0.3 abc 0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_annotations("r", "1.0 1.0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_annotations("r", "\n\n2.0 1.0 0 1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(parse_annotations("r", "0.1 0.2 0").is_err());
        assert!(parse_annotations("r", "0.1 0.2 0 2").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(intervals in prop::collection::vec((0.0f64..100.0, 1e-6f64..5.0), 0..20)) {
            let events: Vec<LabeledEvent> = intervals
                .iter()
                .map(|&(s, d)| LabeledEvent {
                    recording_id: "r".into(),
                    start: s,
                    end: s + d,
                    class: EventClass::Wheeze,
                    provenance: Provenance::Annotated,
                })
                .filter(|e| e.end > e.start)
                .collect();
            let back = parse_annotations("r", &serialize_annotations(&events)).unwrap();
            prop_assert_eq!(back, events);
        }
    }
}
