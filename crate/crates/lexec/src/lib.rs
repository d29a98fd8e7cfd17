//! lexec: learning-guided execution toolkit.
//!
//! Executes arbitrary, possibly incomplete snippets by instrumenting every
//! value use, intercepting undefined-name and missing-member failures, and
//! injecting predictor-chosen concrete values so execution can proceed.
//!
//! The pieces, bottom-up:
//!
//! * [`abstraction`] — the finite value-class alphabet (fine and coarse) and
//!   concretization back to injectable values.
//! * [`instrument`] — source-to-source rewriting of variable reads,
//!   attribute reads and calls into loader calls, plus the metadata sidecar
//!   and model-input context extraction.
//! * [`predict`] — the predictor interface, baseline predictors, a
//!   scriptable stub, and the HTTP client/server pair.
//! * [`engine`] — the runtime engine binding the three loaders to a session
//!   that loads real values when possible and injects otherwise.
//! * [`trace`] — value-use event recording, deduplication, train/held-out
//!   splitting, and top-k predictor evaluation.
//! * [`harness`] — line-coverage measurement, batch driving, and paired
//!   comparison of configurations.
//! * [`differ`] — behavioral diffing of two versions of a function under a
//!   shared session.

use serde::{Deserialize, Serialize};

pub mod abstraction;
pub mod cli;
pub mod differ;
pub mod engine;
pub mod harness;
pub mod instrument;
pub mod predict;
pub mod trace;

/// What kind of value a use-site reads: a variable, an attribute, or the
/// return value of a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Variable,
    Attribute,
    ReturnValue,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Variable => "variable",
            ValueKind::Attribute => "attribute",
            ValueKind::ReturnValue => "return_value",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        match s {
            "variable" => Some(ValueKind::Variable),
            "attribute" => Some(ValueKind::Attribute),
            "return_value" => Some(ValueKind::ReturnValue),
            _ => None,
        }
    }
}

impl std::fmt::Display for ValueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
