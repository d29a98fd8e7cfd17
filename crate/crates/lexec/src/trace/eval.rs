//! Top-k accuracy evaluation of a predictor against held-out events.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::abstraction::{AbstractClass, Granularity};
use crate::instrument::{build_model_input, Sidecar};
use crate::predict::{PredictError, Predictor, PredictorQuery};
use crate::trace::ValueUseEvent;
use crate::ValueKind;

/// Reconstructs the model input for a held-out event. Returning `None`
/// skips the event (counted in the report's skip tally).
pub trait ContextProvider {
    fn build_query(
        &self,
        event: &ValueUseEvent,
        granularity: Granularity,
        top_k: usize,
    ) -> Option<PredictorQuery>;
}

/// Context-free queries; appropriate for predictors that ignore context.
pub struct EmptyContexts;

impl ContextProvider for EmptyContexts {
    fn build_query(
        &self,
        event: &ValueUseEvent,
        granularity: Granularity,
        top_k: usize,
    ) -> Option<PredictorQuery> {
        Some(PredictorQuery::new(
            event.name.clone(),
            event.kind,
            granularity,
            top_k,
        ))
    }
}

/// Rebuilds real contexts from the sidecar plus the original sources.
/// Events whose file or site cannot be resolved are skipped.
pub struct SidecarContexts {
    sidecar: Sidecar,
    sources: HashMap<String, String>,
    window: usize,
}

impl SidecarContexts {
    pub fn new(sidecar: Sidecar, sources: HashMap<String, String>, window: usize) -> SidecarContexts {
        SidecarContexts {
            sidecar,
            sources,
            window,
        }
    }

    /// Loads every file mentioned in the sidecar from `source_root`.
    pub fn from_source_root(
        sidecar: Sidecar,
        source_root: &Path,
        window: usize,
    ) -> SidecarContexts {
        let mut sources = HashMap::new();
        for file in sidecar.files.keys() {
            if let Ok(text) = std::fs::read_to_string(source_root.join(file)) {
                sources.insert(file.clone(), text);
            }
        }
        SidecarContexts::new(sidecar, sources, window)
    }
}

impl ContextProvider for SidecarContexts {
    fn build_query(
        &self,
        event: &ValueUseEvent,
        granularity: Granularity,
        top_k: usize,
    ) -> Option<PredictorQuery> {
        let meta = self.sidecar.lookup(&event.file, event.iid)?;
        let source = self.sources.get(&event.file)?;
        build_model_input(meta, source, self.window, granularity, top_k).ok()
    }
}

#[derive(Debug, Clone)]
pub struct TopkReport {
    /// k -> fraction of evaluated events whose true label appears in the
    /// first k predictions.
    pub accuracy: BTreeMap<usize, f64>,
    /// Per-kind accuracy at each k.
    pub per_kind: BTreeMap<ValueKind, BTreeMap<usize, f64>>,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Queries once per event with `top_k = max(ks)` and scores membership of
/// the ground-truth label in each prefix.
pub fn evaluate_topk(
    predictor: &dyn Predictor,
    heldout: &[ValueUseEvent],
    ks: &[usize],
    granularity: Granularity,
    contexts: &dyn ContextProvider,
) -> Result<TopkReport, PredictError> {
    let max_k = ks.iter().copied().max().unwrap_or(1).max(1);
    let mut hits: BTreeMap<usize, usize> = ks.iter().map(|k| (*k, 0)).collect();
    let mut kind_totals: BTreeMap<ValueKind, usize> = BTreeMap::new();
    let mut kind_hits: BTreeMap<(ValueKind, usize), usize> = BTreeMap::new();
    let mut evaluated = 0usize;
    let mut skipped = 0usize;

    for event in heldout {
        let query = match contexts.build_query(event, granularity, max_k) {
            Some(q) => q,
            None => {
                skipped += 1;
                continue;
            }
        };
        let response = predictor.predict(&query)?;
        let truth: AbstractClass = match granularity {
            Granularity::Fine => AbstractClass::Fine(event.fine),
            Granularity::Coarse => AbstractClass::Coarse(event.coarse),
        };
        evaluated += 1;
        *kind_totals.entry(event.kind).or_insert(0) += 1;
        let rank = response.ranked().iter().position(|(c, _)| *c == truth);
        for k in ks {
            if rank.is_some_and(|r| r < *k) {
                *hits.get_mut(k).expect("k preset") += 1;
                *kind_hits.entry((event.kind, *k)).or_insert(0) += 1;
            }
        }
    }

    let frac = |h: usize| {
        if evaluated == 0 {
            0.0
        } else {
            h as f64 / evaluated as f64
        }
    };
    let accuracy = hits.iter().map(|(k, h)| (*k, frac(*h))).collect();
    let mut per_kind = BTreeMap::new();
    for (kind, total) in &kind_totals {
        let mut by_k = BTreeMap::new();
        for k in ks {
            let h = kind_hits.get(&(*kind, *k)).copied().unwrap_or(0);
            by_k.insert(*k, h as f64 / *total as f64);
        }
        per_kind.insert(*kind, by_k);
    }

    Ok(TopkReport {
        accuracy,
        per_kind,
        evaluated,
        skipped,
    })
}
