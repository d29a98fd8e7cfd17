//! The predictor interface and its implementations.
//!
//! A predictor maps a (name, kind, context) query to a ranked list of
//! abstract value classes. Baselines live in [`baselines`]; [`remote`] and
//! [`server`] speak the HTTP wire protocol so an out-of-process model can
//! plug in.

pub mod baselines;
pub mod remote;
pub mod server;

use serde::{Deserialize, Serialize};

use crate::abstraction::{catalog, AbstractClass, Granularity};
use crate::ValueKind;

/// Input to a predictor: the masked use-site plus surrounding context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorQuery {
    pub name: String,
    pub kind: ValueKind,
    pub pre_context: String,
    pub post_context: String,
    pub granularity: Granularity,
    pub top_k: usize,
}

impl PredictorQuery {
    pub fn new(
        name: impl Into<String>,
        kind: ValueKind,
        granularity: Granularity,
        top_k: usize,
    ) -> PredictorQuery {
        PredictorQuery {
            name: name.into(),
            kind,
            pre_context: String::new(),
            post_context: String::new(),
            granularity,
            top_k,
        }
    }
}

/// Ranked predictions, validated against the query's granularity catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorResponse {
    ranked: Vec<(AbstractClass, f64)>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ResponseError {
    #[error("ranked list is empty")]
    Empty,
    #[error("label '{0}' is not in the {1} catalog")]
    OutOfCatalog(String, Granularity),
    #[error("duplicate label '{0}'")]
    Duplicate(String),
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("scores are not sorted descending")]
    NotSorted,
    #[error("ranked list length {len} exceeds top_k {top_k}")]
    TooLong { len: usize, top_k: usize },
}

impl PredictorResponse {
    pub fn try_new(
        granularity: Granularity,
        top_k: usize,
        ranked: Vec<(AbstractClass, f64)>,
    ) -> Result<PredictorResponse, ResponseError> {
        if ranked.is_empty() {
            return Err(ResponseError::Empty);
        }
        if ranked.len() > top_k {
            return Err(ResponseError::TooLong {
                len: ranked.len(),
                top_k,
            });
        }
        let mut seen = std::collections::HashSet::new();
        let mut prev_score = f64::INFINITY;
        for (class, score) in &ranked {
            if class.granularity() != granularity {
                return Err(ResponseError::OutOfCatalog(
                    class.label().to_string(),
                    granularity,
                ));
            }
            if !seen.insert(*class) {
                return Err(ResponseError::Duplicate(class.label().to_string()));
            }
            if !(0.0..=1.0).contains(score) || score.is_nan() {
                return Err(ResponseError::ScoreOutOfRange(*score));
            }
            if *score > prev_score {
                return Err(ResponseError::NotSorted);
            }
            prev_score = *score;
        }
        Ok(PredictorResponse { ranked })
    }

    /// Convenience for a single certain prediction.
    pub fn single(class: AbstractClass) -> PredictorResponse {
        PredictorResponse {
            ranked: vec![(class, 1.0)],
        }
    }

    pub fn ranked(&self) -> &[(AbstractClass, f64)] {
        &self.ranked
    }

    pub fn top1(&self) -> AbstractClass {
        self.ranked[0].0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("predictor failure: {0}")]
    Internal(String),
}

/// A ranked-classification predictor. Implementations must be safe for
/// concurrent `predict` calls.
pub trait Predictor: Send + Sync {
    /// Short human-readable identifier used in report headers.
    fn describe(&self) -> String;

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError>;
}

// ---------------------------------------------------------------------------
// Wire protocol bodies (bit-exact JSON shapes)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WirePrediction {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub predictions: Vec<WirePrediction>,
}

impl WireResponse {
    pub fn from_response(resp: &PredictorResponse) -> WireResponse {
        WireResponse {
            predictions: resp
                .ranked()
                .iter()
                .map(|(c, s)| WirePrediction {
                    label: c.label().to_string(),
                    score: *s,
                })
                .collect(),
        }
    }

    /// Parses and validates a wire response against the query it answers.
    pub fn into_response(
        self,
        granularity: Granularity,
        top_k: usize,
    ) -> Result<PredictorResponse, PredictError> {
        let mut ranked = Vec::with_capacity(self.predictions.len());
        for p in self.predictions {
            let class = AbstractClass::from_label(granularity, &p.label).ok_or_else(|| {
                PredictError::Schema(format!(
                    "label '{}' is not in the {} catalog",
                    p.label, granularity
                ))
            })?;
            ranked.push((class, p.score));
        }
        PredictorResponse::try_new(granularity, top_k, ranked)
            .map_err(|e| PredictError::Schema(e.to_string()))
    }
}

/// The catalog as (label, class) pairs, handy for table-driven predictors.
pub fn labeled_catalog(granularity: Granularity) -> Vec<(&'static str, AbstractClass)> {
    catalog(granularity)
        .into_iter()
        .map(|c| (c.label(), c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{CoarseClass, FineClass};

    #[test]
    fn response_validation() {
        let g = Granularity::Fine;
        let ok = PredictorResponse::try_new(
            g,
            3,
            vec![
                (AbstractClass::Fine(FineClass::Object), 0.8),
                (AbstractClass::Fine(FineClass::None), 0.2),
            ],
        );
        assert!(ok.is_ok());

        let wrong_granularity = PredictorResponse::try_new(
            g,
            3,
            vec![(AbstractClass::Coarse(CoarseClass::Object), 1.0)],
        );
        assert!(matches!(
            wrong_granularity,
            Err(ResponseError::OutOfCatalog(_, _))
        ));

        let unsorted = PredictorResponse::try_new(
            g,
            3,
            vec![
                (AbstractClass::Fine(FineClass::None), 0.1),
                (AbstractClass::Fine(FineClass::Object), 0.9),
            ],
        );
        assert_eq!(unsorted, Err(ResponseError::NotSorted));

        let too_long = PredictorResponse::try_new(
            g,
            1,
            vec![
                (AbstractClass::Fine(FineClass::None), 0.9),
                (AbstractClass::Fine(FineClass::Object), 0.1),
            ],
        );
        assert!(matches!(too_long, Err(ResponseError::TooLong { .. })));
    }

    #[test]
    fn wire_round_trip_preserves_order_and_scores() {
        let resp = PredictorResponse::try_new(
            Granularity::Coarse,
            5,
            vec![
                (AbstractClass::Coarse(CoarseClass::List), 0.75),
                (AbstractClass::Coarse(CoarseClass::Tuple), 0.25),
            ],
        )
        .unwrap();
        let wire = WireResponse::from_response(&resp);
        let json = serde_json::to_string(&wire).unwrap();
        let parsed: WireResponse = serde_json::from_str(&json).unwrap();
        let back = parsed.into_response(Granularity::Coarse, 5).unwrap();
        assert_eq!(back, resp);
    }

    #[test]
    fn wire_rejects_out_of_catalog_labels() {
        let wire = WireResponse {
            predictions: vec![WirePrediction {
                label: "gizmo".into(),
                score: 1.0,
            }],
        };
        let err = wire.into_response(Granularity::Fine, 1).unwrap_err();
        assert!(matches!(err, PredictError::Schema(_)));
    }

    #[test]
    fn query_serializes_with_wire_field_names() {
        let q = PredictorQuery {
            name: "x".into(),
            kind: ValueKind::ReturnValue,
            pre_context: "a".into(),
            post_context: "b".into(),
            granularity: Granularity::Fine,
            top_k: 3,
        };
        let json = serde_json::to_value(&q).unwrap();
        assert_eq!(json["kind"], "return_value");
        assert_eq!(json["granularity"], "fine");
        assert_eq!(json["pre_context"], "a");
        assert_eq!(json["top_k"], 3);
    }
}
