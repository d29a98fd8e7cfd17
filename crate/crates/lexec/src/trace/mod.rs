//! Value-use event recording, deduplication, splitting, and predictor
//! evaluation against held-out events.

pub mod eval;

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{coarsen, CoarseClass, FineClass};
use crate::engine::{run_unit, EngineSession, RecordedUse};
use crate::instrument::InstrumentedUnit;
use crate::ValueKind;

/// One dynamic value use: name, abstracted value under both granularities,
/// use kind, and the site that observed it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueUseEvent {
    pub name: String,
    pub kind: ValueKind,
    pub fine: FineClass,
    pub coarse: CoarseClass,
    pub iid: u32,
    pub file: String,
}

impl ValueUseEvent {
    pub fn new(
        name: impl Into<String>,
        kind: ValueKind,
        fine: FineClass,
        iid: u32,
        file: impl Into<String>,
    ) -> ValueUseEvent {
        ValueUseEvent {
            name: name.into(),
            kind,
            fine,
            coarse: coarsen(fine),
            iid,
            file: file.into(),
        }
    }

    fn from_recorded(r: RecordedUse, file: &str) -> ValueUseEvent {
        ValueUseEvent::new(r.name, r.kind, r.fine, r.iid, file)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceDataset {
    pub events: Vec<ValueUseEvent>,
    /// Identifiers of the runs the events came from.
    pub provenance: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("record run aborted: {0}")]
    RecordAborted(String),
    #[error("split fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad trace line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("engine error: {0}")]
    Engine(#[from] crate::engine::EngineError),
}

/// Executes an instrumented unit in record mode: loaders load the real
/// value, abstract it, append an event, and return the value unchanged.
/// Record mode never injects; any failure aborts with a diagnostic.
pub fn record_run(
    unit: &InstrumentedUnit,
    timeout: Option<std::time::Duration>,
) -> Result<Vec<ValueUseEvent>, TraceError> {
    let session = EngineSession::record(unit);
    let outcome = run_unit(unit, &session, timeout)?;
    if let Some(msg) = session.record_failure() {
        return Err(TraceError::RecordAborted(msg));
    }
    if let Some(term) = outcome.terminal {
        return Err(TraceError::RecordAborted(format!(
            "{} at line {:?}: {}",
            term.exc_type, term.line, term.message
        )));
    }
    if outcome.timed_out {
        return Err(TraceError::RecordAborted("timed out".to_string()));
    }
    Ok(session
        .recorded_uses()
        .into_iter()
        .map(|r| ValueUseEvent::from_recorded(r, &unit.file))
        .collect())
}

/// Keeps the first occurrence per (name, fine label, kind, site); stable
/// and idempotent.
pub fn deduplicate(events: Vec<ValueUseEvent>) -> TraceDataset {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(events.len());
    for ev in events {
        let key = (
            ev.name.clone(),
            ev.fine,
            ev.kind,
            ev.iid,
            ev.file.clone(),
        );
        if seen.insert(key) {
            out.push(ev);
        }
    }
    TraceDataset {
        events: out,
        provenance: Vec::new(),
    }
}

/// Seeded shuffle followed by a floor split: `⌊N·f⌋` training events, the
/// rest held out. Disjoint and covering.
pub fn split(
    ds: &TraceDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(TraceDataset, TraceDataset), TraceError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(TraceError::BadFraction(train_fraction));
    }
    let mut events = ds.events.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    events.shuffle(&mut rng);
    let n_train = (events.len() as f64 * train_fraction).floor() as usize;
    let heldout = events.split_off(n_train);
    Ok((
        TraceDataset {
            events,
            provenance: ds.provenance.clone(),
        },
        TraceDataset {
            events: heldout,
            provenance: ds.provenance.clone(),
        },
    ))
}

/// Adapter feeding a frequency table: (name, fine class) pairs.
pub fn frequency_observations(events: &[ValueUseEvent]) -> Vec<(String, FineClass)> {
    events.iter().map(|e| (e.name.clone(), e.fine)).collect()
}

/// Fits a frequency table straight from recorded events.
pub fn fit_frequency(events: &[ValueUseEvent]) -> crate::predict::baselines::FrequencyTable {
    crate::predict::baselines::FrequencyTable::fit(frequency_observations(events))
}

/// Writes one JSON object per line: {"name","kind","fine","coarse","iid","file"}.
pub fn write_trace(path: &Path, events: &[ValueUseEvent]) -> Result<(), TraceError> {
    let io_err = |e: std::io::Error| TraceError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    for ev in events {
        let line = serde_json::to_string(ev).expect("event serializes");
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_trace(path: &Path) -> Result<Vec<ValueUseEvent>, TraceError> {
    let io_err = |e: std::io::Error| TraceError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let reader = std::io::BufReader::new(file);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: ValueUseEvent = serde_json::from_str(&line).map_err(|e| TraceError::BadLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        if ev.coarse != coarsen(ev.fine) {
            return Err(TraceError::BadLine {
                line: i + 1,
                message: format!(
                    "coarse label '{}' does not match coarsened fine label '{}'",
                    ev.coarse.label(),
                    coarsen(ev.fine).label()
                ),
            });
        }
        events.push(ev);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(name: &str, fine: FineClass, kind: ValueKind, iid: u32) -> ValueUseEvent {
        ValueUseEvent::new(name, kind, fine, iid, "t.py")
    }

    #[test]
    fn events_store_consistent_coarse_labels() {
        let e = ev("x", FineClass::IntPos, ValueKind::Variable, 0);
        assert_eq!(e.coarse, CoarseClass::Integer);
    }

    #[test]
    fn dedup_collapses_identical_events() {
        let events: Vec<_> = (0..10)
            .map(|_| ev("x", FineClass::IntPos, ValueKind::Variable, 3))
            .collect();
        let ds = deduplicate(events);
        assert_eq!(ds.events.len(), 1);
    }

    #[test]
    fn dedup_keeps_distinct_labels_at_same_site() {
        let events = vec![
            ev("x", FineClass::IntPos, ValueKind::Variable, 3),
            ev("x", FineClass::IntNeg, ValueKind::Variable, 3),
        ];
        let ds = deduplicate(events);
        assert_eq!(ds.events.len(), 2);
    }

    #[test]
    fn dedup_is_idempotent() {
        let events = vec![
            ev("a", FineClass::None, ValueKind::Variable, 0),
            ev("b", FineClass::IntPos, ValueKind::ReturnValue, 1),
            ev("a", FineClass::None, ValueKind::Variable, 0),
        ];
        let once = deduplicate(events);
        let twice = deduplicate(once.events.clone());
        assert_eq!(once.events, twice.events);
    }

    #[test]
    fn split_respects_floor_rule() {
        let events: Vec<_> = (0..100)
            .map(|i| ev(&format!("n{i}"), FineClass::IntPos, ValueKind::Variable, i))
            .collect();
        let ds = TraceDataset {
            events,
            provenance: Vec::new(),
        };
        let (train, heldout) = split(&ds, 0.95, 17).unwrap();
        assert_eq!(train.events.len(), 95);
        assert_eq!(heldout.events.len(), 5);

        // Same seed, same partition.
        let (train2, heldout2) = split(&ds, 0.95, 17).unwrap();
        assert_eq!(train.events, train2.events);
        assert_eq!(heldout.events, heldout2.events);

        // Disjoint and covering.
        let mut all: Vec<_> = train.events.iter().chain(&heldout.events).collect();
        all.sort_by_key(|e| e.iid);
        assert_eq!(all.len(), 100);
        for (i, e) in all.iter().enumerate() {
            assert_eq!(e.iid, i as u32);
        }
    }

    #[test]
    fn split_single_event_goes_to_heldout_under_floor() {
        let ds = TraceDataset {
            events: vec![ev("x", FineClass::None, ValueKind::Variable, 0)],
            provenance: Vec::new(),
        };
        let (train, heldout) = split(&ds, 0.95, 0).unwrap();
        assert_eq!(train.events.len(), 0);
        assert_eq!(heldout.events.len(), 1);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let ds = TraceDataset::default();
        assert!(split(&ds, 0.0, 0).is_err());
        assert!(split(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn trace_line_schema() {
        let e = ev("x", FineClass::StrNonempty, ValueKind::Attribute, 4);
        let json = serde_json::to_value(&e).unwrap();
        assert_eq!(json["name"], "x");
        assert_eq!(json["kind"], "attribute");
        assert_eq!(json["fine"], "str_nonempty");
        assert_eq!(json["coarse"], "string");
        assert_eq!(json["iid"], 4);
        assert_eq!(json["file"], "t.py");
    }
}
