//! Temporal edge lists (`src dst timestamp` per line) and their per-segment
//! Bernoulli frequency matrices.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LogisticMatrixModel;

pub const DEFAULT_SEGMENTS: usize = 49;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeEvent {
    pub source: usize,
    pub target: usize,
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeListDataset {
    pub events: Vec<EdgeEvent>,
    /// One more than the largest id seen.
    pub node_count: usize,
    pub segments: usize,
}

impl EdgeListDataset {
    pub fn max_timestamp(&self) -> u64 {
        self.events.iter().map(|e| e.timestamp).max().unwrap_or(0)
    }

    /// Segment index of `timestamp` among equal-width bins over
    /// `[0, max_timestamp]`; the last bin is closed on the right.
    pub fn segment_of(&self, timestamp: u64) -> usize {
        let max = self.max_timestamp();
        if max == 0 {
            return 0;
        }
        let bin = (timestamp as u128 * self.segments as u128) / max as u128;
        (bin as usize).min(self.segments - 1)
    }
}

pub fn parse_edge_list(path: &Path, segments: usize) -> Result<EdgeListDataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_edge_list_str(&text, path, segments)
}

/// Parses edge-list text. `origin` only labels error messages.
pub fn parse_edge_list_str(text: &str, origin: &Path, segments: usize) -> Result<EdgeListDataset> {
    if segments == 0 {
        return Err(Error::contract("segments must be at least 1"));
    }
    let err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        message,
    };
    let mut events = Vec::new();
    let mut max_id = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(
                line_no,
                format!("expected 3 fields 'src dst timestamp', found {}", fields.len()),
            ));
        }
        let mut vals = [0u64; 3];
        for (k, f) in fields.iter().enumerate() {
            let v: i128 = f
                .parse()
                .map_err(|_| err(line_no, format!("field {} is not an integer: '{f}'", k + 1)))?;
            if v < 0 {
                let what = if k < 2 { "id" } else { "timestamp" };
                return Err(err(line_no, format!("negative {what}: {v}")));
            }
            vals[k] = u64::try_from(v)
                .map_err(|_| err(line_no, format!("field {} out of range: {v}", k + 1)))?;
        }
        let ev = EdgeEvent {
            source: vals[0] as usize,
            target: vals[1] as usize,
            timestamp: vals[2],
        };
        max_id = max_id.max(ev.source).max(ev.target);
        events.push(ev);
    }
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(EdgeListDataset {
        events,
        node_count: max_id + 1,
        segments,
    })
}

/// Per-cell frequency of segments with at least one event, as a logistic matrix
/// model with `segments` trials per cell.
pub fn build_frequency_matrix(ds: &EdgeListDataset, penalty: f64) -> Result<LogisticMatrixModel> {
    let n = ds.node_count;
    let mut active: HashSet<(usize, usize, usize)> = HashSet::new();
    for e in &ds.events {
        if e.source >= n || e.target >= n {
            return Err(Error::contract("event id outside the node range"));
        }
        active.insert((e.source, e.target, ds.segment_of(e.timestamp)));
    }
    let mut counts = DMatrix::<f64>::zeros(n, n);
    for &(i, j, _) in &active {
        counts[(i, j)] += 1.0;
    }
    let t = ds.segments as f64;
    LogisticMatrixModel::new(counts / t, ds.segments, penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EdgeListDataset> {
        parse_edge_list_str(text, Path::new("test.txt"), DEFAULT_SEGMENTS)
    }

    #[test]
    fn empty_and_comment_only_inputs() {
        assert!(matches!(parse(""), Err(Error::NoEvents)));
        assert!(matches!(parse("# a\n# b\n"), Err(Error::NoEvents)));
        assert_eq!(Error::NoEvents.to_string(), "no events");
    }

    #[test]
    fn two_events_in_end_bins() {
        let ds = parse("0 1 0\n0 1 100\n").unwrap();
        assert_eq!(ds.node_count, 2);
        assert_eq!(ds.segment_of(0), 0);
        assert_eq!(ds.segment_of(100), 48);
        let m = build_frequency_matrix(&ds, 0.0).unwrap();
        assert!((m.freq[(0, 1)] - 2.0 / 49.0).abs() < 1e-15);
        assert_eq!(m.freq[(1, 0)], 0.0);
    }

    #[test]
    fn repeated_events_in_one_segment_count_once() {
        let ds = parse("0 1 2\n0 1 2\n0 1 3\n2 2 98\n").unwrap();
        let m = build_frequency_matrix(&ds, 0.0).unwrap();
        assert!((m.freq[(0, 1)] - 1.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn every_segment_active_gives_one() {
        let text: String = (0..49).map(|k| format!("3 0 {}\n", k * 2)).collect();
        let ds = parse(&text).unwrap();
        let m = build_frequency_matrix(&ds, 0.0).unwrap();
        assert_eq!(m.freq[(3, 0)], 1.0);
    }

    #[test]
    fn zero_max_timestamp_uses_first_segment() {
        let ds = parse("0 1 0\n1 0 0\n").unwrap();
        let m = build_frequency_matrix(&ds, 0.0).unwrap();
        assert!((m.freq[(0, 1)] - 1.0 / 49.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        match parse("# header\n0 1 5\n0 x 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match parse("0 1\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 1);
                assert!(message.contains("3 fields"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse("0 -1 4\n") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("negative id")),
            other => panic!("unexpected {other:?}"),
        }
        match parse("0 1 -4\n") {
            Err(Error::Parse { message, .. }) => assert!(message.contains("negative timestamp")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
