//! Baseline predictors: naive, random, frequency-based, and a scriptable
//! stub for tests and demos.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstraction::{
    catalog, coarsen, AbstractClass, CoarseClass, FineClass, Granularity,
};
use crate::predict::{PredictError, Predictor, PredictorQuery, PredictorResponse};
use crate::ValueKind;

fn object_class(granularity: Granularity) -> AbstractClass {
    match granularity {
        Granularity::Fine => AbstractClass::Fine(FineClass::Object),
        Granularity::Coarse => AbstractClass::Coarse(CoarseClass::Object),
    }
}

/// Always predicts `object`.
#[derive(Debug, Default, Clone)]
pub struct NaivePredictor;

impl Predictor for NaivePredictor {
    fn describe(&self) -> String {
        "naive".to_string()
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        Ok(PredictorResponse::single(object_class(query.granularity)))
    }
}

/// Draws `top_k` distinct classes uniformly from the catalog; the first
/// element is a uniform draw over the whole alphabet.
pub struct RandomPredictor {
    rng: Mutex<ChaCha8Rng>,
}

impl RandomPredictor {
    pub fn seeded(seed: u64) -> RandomPredictor {
        RandomPredictor {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Predictor for RandomPredictor {
    fn describe(&self) -> String {
        "random".to_string()
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        let mut all = catalog(query.granularity);
        let k = query.top_k.clamp(1, all.len());
        let mut rng = self.rng.lock().expect("rng lock");
        all.partial_shuffle(&mut *rng, k);
        let score = 1.0 / all.len() as f64;
        let ranked = all.into_iter().take(k).map(|c| (c, score)).collect();
        PredictorResponse::try_new(query.granularity, query.top_k.max(1), ranked)
            .map_err(|e| PredictError::Internal(e.to_string()))
    }
}

/// Per-name distribution of observed fine classes.
///
/// Coarse queries aggregate the fine counts through [`coarsen`], so one
/// fitted table serves both granularities.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub per_name: BTreeMap<String, BTreeMap<FineClass, u64>>,
    pub total_observations: u64,
}

impl FrequencyTable {
    /// Aggregates (name, observed fine class) pairs.
    pub fn fit<I>(observations: I) -> FrequencyTable
    where
        I: IntoIterator<Item = (String, FineClass)>,
    {
        let mut table = FrequencyTable::default();
        for (name, class) in observations {
            *table
                .per_name
                .entry(name)
                .or_default()
                .entry(class)
                .or_insert(0) += 1;
        }
        table.total_observations = table
            .per_name
            .values()
            .flat_map(|m| m.values())
            .sum();
        table
    }

    pub fn observations_for(&self, name: &str) -> u64 {
        self.per_name
            .get(name)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }
}

/// Ranks classes for a seen name by empirical probability (most frequent
/// first, catalog order breaking ties); unseen names fall back to the naive
/// prediction. Ignores context fields by design: the association is purely
/// name-based.
pub struct FrequencyPredictor {
    table: FrequencyTable,
}

impl FrequencyPredictor {
    pub fn new(table: FrequencyTable) -> FrequencyPredictor {
        FrequencyPredictor { table }
    }

    pub fn table(&self) -> &FrequencyTable {
        &self.table
    }
}

impl Predictor for FrequencyPredictor {
    fn describe(&self) -> String {
        format!(
            "frequency({} names, {} observations)",
            self.table.per_name.len(),
            self.table.total_observations
        )
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        let counts = match self.table.per_name.get(&query.name) {
            Some(counts) if !counts.is_empty() => counts,
            _ => return Ok(PredictorResponse::single(object_class(query.granularity))),
        };
        let total: u64 = counts.values().sum();

        // Project counts into the query's granularity, preserving catalog
        // order for deterministic tie-breaks.
        let mut scored: Vec<(AbstractClass, f64)> = Vec::new();
        match query.granularity {
            Granularity::Fine => {
                for class in catalog(Granularity::Fine) {
                    if let AbstractClass::Fine(f) = class {
                        if let Some(n) = counts.get(&f) {
                            scored.push((class, *n as f64 / total as f64));
                        }
                    }
                }
            }
            Granularity::Coarse => {
                let mut agg: BTreeMap<CoarseClass, u64> = BTreeMap::new();
                for (f, n) in counts {
                    *agg.entry(coarsen(*f)).or_insert(0) += n;
                }
                for class in catalog(Granularity::Coarse) {
                    if let AbstractClass::Coarse(c) = class {
                        if let Some(n) = agg.get(&c) {
                            scored.push((class, *n as f64 / total as f64));
                        }
                    }
                }
            }
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        scored.truncate(query.top_k.max(1));
        PredictorResponse::try_new(query.granularity, query.top_k.max(1), scored)
            .map_err(|e| PredictError::Internal(e.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Scriptable stub

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StubRule {
    pub name: String,
    /// Restricts the rule to one use kind; `None` matches any kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ValueKind>,
    /// Label resolved against the query's granularity at lookup time.
    pub label: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StubScript {
    pub rules: Vec<StubRule>,
}

/// Deterministic lookup-table predictor. Rules match on (name, kind) first,
/// then on name alone; anything unmatched gets the naive prediction.
pub struct StubPredictor {
    exact: HashMap<(String, ValueKind), String>,
    by_name: HashMap<String, String>,
}

impl StubPredictor {
    pub fn new(script: StubScript) -> StubPredictor {
        let mut exact = HashMap::new();
        let mut by_name = HashMap::new();
        for rule in script.rules {
            match rule.kind {
                Some(kind) => {
                    exact.insert((rule.name, kind), rule.label);
                }
                None => {
                    by_name.insert(rule.name, rule.label);
                }
            }
        }
        StubPredictor { exact, by_name }
    }

    pub fn from_pairs(pairs: &[(&str, ValueKind, &str)]) -> StubPredictor {
        StubPredictor::new(StubScript {
            rules: pairs
                .iter()
                .map(|(n, k, l)| StubRule {
                    name: n.to_string(),
                    kind: Some(*k),
                    label: l.to_string(),
                })
                .collect(),
        })
    }

    pub fn load_script(path: &Path) -> Result<StubPredictor, PredictError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PredictError::Internal(format!("cannot read stub script: {e}")))?;
        let script: StubScript = serde_json::from_str(&text)
            .map_err(|e| PredictError::Schema(format!("bad stub script: {e}")))?;
        Ok(StubPredictor::new(script))
    }
}

impl Predictor for StubPredictor {
    fn describe(&self) -> String {
        format!("stub({} rules)", self.exact.len() + self.by_name.len())
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        let label = self
            .exact
            .get(&(query.name.clone(), query.kind))
            .or_else(|| self.by_name.get(&query.name));
        let class = label
            .and_then(|l| AbstractClass::from_label(query.granularity, l))
            .unwrap_or_else(|| object_class(query.granularity));
        Ok(PredictorResponse::single(class))
    }
}
