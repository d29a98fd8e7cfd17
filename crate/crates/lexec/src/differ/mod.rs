//! Detection of semantics-changing commits.
//!
//! Both versions of a changed function are compiled into one driver unit,
//! renamed apart on their definition lines only, invoked with no arguments
//! (missing parameters resolve through the name loader like any missing
//! value), and executed in a single engine session so the consistency cache
//! hands unchanged reads the same injected values. Return values are then
//! compared under three difference rules.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use lexec_lang::ast::StmtKind;
use lexec_lang::{parse_program, Value};

use crate::abstraction::{ConcretizationMode, Granularity};
use crate::engine::{run_unit, EngineConfig, EngineSession};
use crate::harness::RunReport;
use crate::instrument::instrument_source;
use crate::predict::Predictor;

pub const DRIVER_OLD_NAME: &str = "__lx_old";
pub const DRIVER_NEW_NAME: &str = "__lx_new";
pub const DRIVER_OLD_CAPTURE: &str = "__lx_result_old";
pub const DRIVER_NEW_CAPTURE: &str = "__lx_result_new";

#[derive(Debug, thiserror::Error)]
pub enum DifferError {
    #[error("{which} source does not parse: {message}")]
    Parse { which: &'static str, message: String },
    #[error("{which} source must define exactly one function, found {found}")]
    NotSingleFunction { which: &'static str, found: usize },
    #[error("function names differ: '{old}' vs '{new}'")]
    NameMismatch { old: String, new: String },
    #[error("no function changed between the two revisions")]
    NoChange,
    #[error("more than one function changed ({0:?}); out of scope")]
    MultipleChanged(Vec<String>),
    #[error("function sets differ between revisions")]
    FunctionSetChanged,
}

/// The old and new version of one function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionPair {
    pub old_source: String,
    pub new_source: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<PairOrigin>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOrigin {
    pub commit: String,
    pub file: String,
}

struct ParsedFunction {
    name: String,
    name_span: lexec_lang::Span,
}

fn single_function(source: &str, which: &'static str) -> Result<ParsedFunction, DifferError> {
    let program = parse_program(source).map_err(|e| DifferError::Parse {
        which,
        message: e.to_string(),
    })?;
    let defs: Vec<_> = program
        .body
        .iter()
        .filter_map(|s| match &s.kind {
            StmtKind::Def {
                name, name_span, ..
            } => Some((name.clone(), *name_span)),
            _ => None,
        })
        .collect();
    if defs.len() != 1 || program.body.len() != 1 {
        return Err(DifferError::NotSingleFunction {
            which,
            found: defs.len(),
        });
    }
    Ok(ParsedFunction {
        name: defs[0].0.clone(),
        name_span: defs[0].1,
    })
}

impl FunctionPair {
    /// Validates that both sources parse and define exactly one function of
    /// the same name.
    pub fn parse(old_source: &str, new_source: &str) -> Result<FunctionPair, DifferError> {
        let old = single_function(old_source, "old")?;
        let new = single_function(new_source, "new")?;
        if old.name != new.name {
            return Err(DifferError::NameMismatch {
                old: old.name,
                new: new.name,
            });
        }
        Ok(FunctionPair {
            old_source: old_source.to_string(),
            new_source: new_source.to_string(),
            name: old.name,
            origin: None,
        })
    }
}

/// Renames the function on its definition line only; free names inside the
/// body stay untouched so consistency-cache keys collide across versions as
/// intended.
fn rename_definition(source: &str, f: &ParsedFunction, new_name: &str) -> String {
    let chars: Vec<char> = source.chars().collect();
    let mut out: String = chars[..f.name_span.start].iter().collect();
    out.push_str(new_name);
    out.extend(chars[f.name_span.end..].iter());
    out
}

/// A compilable unit holding both versions plus zero-argument invocations
/// capturing the two return values.
#[derive(Debug, Clone)]
pub struct DriverSource {
    pub source: String,
}

pub fn build_driver(pair: &FunctionPair) -> Result<DriverSource, DifferError> {
    let old = single_function(&pair.old_source, "old")?;
    let new = single_function(&pair.new_source, "new")?;
    let old_text = rename_definition(&pair.old_source, &old, DRIVER_OLD_NAME);
    let new_text = rename_definition(&pair.new_source, &new, DRIVER_NEW_NAME);
    let terminated = |s: String| if s.ends_with('\n') { s } else { s + "\n" };
    let source = format!(
        "{}{}{} = {}()\n{} = {}()\n",
        terminated(old_text),
        terminated(new_text),
        DRIVER_OLD_CAPTURE,
        DRIVER_OLD_NAME,
        DRIVER_NEW_CAPTURE,
        DRIVER_NEW_NAME,
    );
    Ok(DriverSource { source })
}

// ---------------------------------------------------------------------------
// Return-value comparison

/// The rule a detected difference violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifferenceRule {
    /// (i) the values have different types.
    TypeMismatch,
    /// (ii) both are primitive with unequal values.
    PrimitiveValue,
    /// (iii) both are collections with unequal sizes.
    CollectionSize,
}

impl DifferenceRule {
    pub fn as_str(self) -> &'static str {
        match self {
            DifferenceRule::TypeMismatch => "i: type mismatch",
            DifferenceRule::PrimitiveValue => "ii: primitive value mismatch",
            DifferenceRule::CollectionSize => "iii: collection size mismatch",
        }
    }
}

fn is_primitive(v: &Value) -> bool {
    matches!(
        v,
        Value::None | Value::Bool(_) | Value::Int(_) | Value::Float(_) | Value::Str(_)
    )
}

fn collection_len(v: &Value) -> Option<usize> {
    match v {
        Value::List(l) => Some(l.borrow().len()),
        Value::Tuple(t) => Some(t.len()),
        Value::Set(s) => Some(s.borrow().len()),
        Value::Dict(d) => Some(d.borrow().len()),
        _ => None,
    }
}

/// Difference verdict on two return values. Distinct opaque objects are
/// never reported different: comparing them accurately is not possible, so
/// the check underapproximates.
pub fn compare_returns(a: &Value, b: &Value) -> Option<DifferenceRule> {
    if a.type_name() != b.type_name() {
        return Some(DifferenceRule::TypeMismatch);
    }
    if is_primitive(a) && is_primitive(b) {
        if !a.eq_value(b) {
            return Some(DifferenceRule::PrimitiveValue);
        }
        return None;
    }
    if let (Some(la), Some(lb)) = (collection_len(a), collection_len(b)) {
        if la != lb {
            return Some(DifferenceRule::CollectionSize);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DiffOutcome {
    /// At least one invocation raised; no conclusion drawn.
    Exceptional { detail: String },
    /// Identical observable returns. No guarantee of semantic equivalence:
    /// another execution might still expose a difference.
    SameBehavior,
    /// A concrete witnessing execution produced returns violating a rule.
    SemanticsChanging { rule: DifferenceRule, detail: String },
}

/// Outcome plus the witnessing run evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub outcome: DiffOutcome,
    pub old_return: Option<String>,
    pub new_return: Option<String>,
    /// Report of the shared driver execution (both invocations run in one
    /// session).
    pub evidence: Option<RunReport>,
}

#[derive(Clone)]
pub struct DifferConfig {
    pub granularity: Granularity,
    pub mode: ConcretizationMode,
    pub seed: u64,
    pub timeout: Duration,
}

impl Default for DifferConfig {
    fn default() -> Self {
        DifferConfig {
            granularity: Granularity::Fine,
            mode: ConcretizationMode::Deterministic,
            seed: 0,
            timeout: Duration::from_secs(10),
        }
    }
}

/// Lexecutes both versions in one session and classifies the pair.
/// Deterministic given the seed.
pub fn classify(
    pair: &FunctionPair,
    predictor: Arc<dyn Predictor>,
    config: &DifferConfig,
) -> ClassifyResult {
    let driver = match build_driver(pair) {
        Ok(d) => d,
        Err(e) => {
            return ClassifyResult {
                outcome: DiffOutcome::Exceptional {
                    detail: format!("driver build failed: {e}"),
                },
                old_return: None,
                new_return: None,
                evidence: None,
            }
        }
    };
    let unit = match instrument_source(&driver.source, "driver.py") {
        Ok(u) => u,
        Err(e) => {
            return ClassifyResult {
                outcome: DiffOutcome::Exceptional {
                    detail: format!("driver instrumentation failed: {e}"),
                },
                old_return: None,
                new_return: None,
                evidence: None,
            }
        }
    };
    let engine_config = EngineConfig {
        granularity: config.granularity,
        mode: config.mode,
        seed: config.seed,
        window: crate::engine::DEFAULT_WINDOW,
    };
    let session = EngineSession::guided(&unit, predictor, &engine_config);
    let outcome = match run_unit(&unit, &session, Some(config.timeout)) {
        Ok(o) => o,
        Err(e) => {
            return ClassifyResult {
                outcome: DiffOutcome::Exceptional {
                    detail: format!("driver run failed: {e}"),
                },
                old_return: None,
                new_return: None,
                evidence: None,
            }
        }
    };

    let report = RunReport {
        snippet: format!("{}@driver", pair.name),
        config: "differ".to_string(),
        countable_lines: std::collections::BTreeSet::new(),
        executed_lines: outcome.executed_lines.clone(),
        covered_lines: outcome.covered_lines.clone(),
        terminal_exception: outcome.terminal.clone(),
        injections: outcome.injections.clone(),
        degraded_events: outcome.degraded_events.clone(),
        duration_ms: outcome.duration.as_secs_f64() * 1000.0,
        flags: Vec::new(),
    };

    if outcome.timed_out {
        return ClassifyResult {
            outcome: DiffOutcome::Exceptional {
                detail: "driver timed out".to_string(),
            },
            old_return: None,
            new_return: None,
            evidence: Some(report),
        };
    }
    if let Some(term) = &outcome.terminal {
        return ClassifyResult {
            outcome: DiffOutcome::Exceptional {
                detail: format!("{}: {}", term.exc_type, term.message),
            },
            old_return: None,
            new_return: None,
            evidence: Some(report),
        };
    }

    let find = |name: &str| {
        outcome
            .globals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
    };
    let (old_v, new_v) = match (find(DRIVER_OLD_CAPTURE), find(DRIVER_NEW_CAPTURE)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return ClassifyResult {
                outcome: DiffOutcome::Exceptional {
                    detail: "driver finished without captures".to_string(),
                },
                old_return: None,
                new_return: None,
                evidence: Some(report),
            }
        }
    };

    let outcome = match compare_returns(&old_v, &new_v) {
        Some(rule) => DiffOutcome::SemanticsChanging {
            rule,
            detail: format!(
                "{}: old returned {} ({}), new returned {} ({})",
                rule.as_str(),
                old_v.to_repr_string(),
                old_v.type_name(),
                new_v.to_repr_string(),
                new_v.type_name(),
            ),
        },
        None => DiffOutcome::SameBehavior,
    };
    ClassifyResult {
        outcome,
        old_return: Some(old_v.to_repr_string()),
        new_return: Some(new_v.to_repr_string()),
        evidence: Some(report),
    }
}

// ---------------------------------------------------------------------------
// Pair extraction from two file revisions

/// Pairs top-level functions of two revisions by name and returns the single
/// changed pair. Commits touching multiple functions, changing none, or
/// altering the function set are flagged out of scope.
pub fn pair_changed_functions(
    old_file: &str,
    new_file: &str,
) -> Result<FunctionPair, DifferError> {
    let extract = |source: &str, which: &'static str| -> Result<Vec<(String, String)>, DifferError> {
        let program = parse_program(source).map_err(|e| DifferError::Parse {
            which,
            message: e.to_string(),
        })?;
        let chars: Vec<char> = source.chars().collect();
        Ok(program
            .body
            .iter()
            .filter_map(|s| match &s.kind {
                StmtKind::Def { name, .. } => {
                    let text: String = chars[s.span.start..s.span.end].iter().collect();
                    Some((name.clone(), text))
                }
                _ => None,
            })
            .collect())
    };
    let old_fns = extract(old_file, "old")?;
    let new_fns = extract(new_file, "new")?;

    let old_names: Vec<&String> = old_fns.iter().map(|(n, _)| n).collect();
    let new_names: Vec<&String> = new_fns.iter().map(|(n, _)| n).collect();
    if old_names != new_names {
        return Err(DifferError::FunctionSetChanged);
    }

    let changed: Vec<(String, String, String)> = old_fns
        .iter()
        .zip(new_fns.iter())
        .filter(|((_, old_text), (_, new_text))| old_text != new_text)
        .map(|((name, old_text), (_, new_text))| {
            (name.clone(), old_text.clone(), new_text.clone())
        })
        .collect();

    match changed.len() {
        0 => Err(DifferError::NoChange),
        1 => {
            let (name, old_text, new_text) = changed.into_iter().next().expect("one change");
            let ensure_nl = |s: String| if s.ends_with('\n') { s } else { s + "\n" };
            Ok(FunctionPair {
                old_source: ensure_nl(old_text),
                new_source: ensure_nl(new_text),
                name,
                origin: None,
            })
        }
        _ => Err(DifferError::MultipleChanged(
            changed.into_iter().map(|(n, _, _)| n).collect(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lexec_lang::value::DummyObj;

    #[test]
    fn compare_rule_i_type_mismatch() {
        assert_eq!(
            compare_returns(&Value::Int(1), &Value::str_value("a")),
            Some(DifferenceRule::TypeMismatch)
        );
    }

    #[test]
    fn compare_rule_ii_primitive_values() {
        assert_eq!(
            compare_returns(&Value::Int(0), &Value::Int(1)),
            Some(DifferenceRule::PrimitiveValue)
        );
        assert_eq!(compare_returns(&Value::None, &Value::None), None);
        assert_eq!(
            compare_returns(&Value::str_value("x"), &Value::str_value("x")),
            None
        );
    }

    #[test]
    fn compare_rule_iii_collection_sizes() {
        let a = Value::new_list(vec![Value::Int(1)]);
        let b = Value::new_list(vec![Value::Int(1), Value::Int(2)]);
        assert_eq!(compare_returns(&a, &b), Some(DifferenceRule::CollectionSize));
        // Same size, different contents: not reported.
        let c = Value::new_list(vec![Value::Int(9)]);
        assert_eq!(compare_returns(&a, &c), None);
    }

    #[test]
    fn distinct_opaque_objects_are_not_different() {
        let a = Value::Dummy(DummyObj::fresh());
        let b = Value::Dummy(DummyObj::fresh());
        assert_eq!(compare_returns(&a, &b), None);
    }

    #[test]
    fn driver_renames_only_definition_line() {
        let pair = FunctionPair::parse(
            "def f(x):\n    return f\n",
            "def f(x):\n    y = 1\n    return f\n",
        )
        .unwrap();
        let driver = build_driver(&pair).unwrap();
        // Definition lines renamed apart; the free-name read of `f` in the
        // bodies is untouched.
        assert!(driver.source.contains(&format!("def {DRIVER_OLD_NAME}(x):")));
        assert!(driver.source.contains(&format!("def {DRIVER_NEW_NAME}(x):")));
        assert!(driver.source.contains("return f"));
        assert!(driver
            .source
            .contains(&format!("{DRIVER_OLD_CAPTURE} = {DRIVER_OLD_NAME}()")));
    }

    #[test]
    fn pair_requires_single_function() {
        let err = FunctionPair::parse("x = 1\n", "def f():\n    pass\n").unwrap_err();
        assert!(matches!(err, DifferError::NotSingleFunction { .. }));
    }

    #[test]
    fn extraction_finds_single_changed_function() {
        let old = "def a():\n    return 1\n\ndef b():\n    return 2\n";
        let new = "def a():\n    return 1\n\ndef b():\n    return 3\n";
        let pair = pair_changed_functions(old, new).unwrap();
        assert_eq!(pair.name, "b");
        assert!(pair.old_source.contains("return 2"));
        assert!(pair.new_source.contains("return 3"));
    }

    #[test]
    fn extraction_flags_multi_function_commits() {
        let old = "def a():\n    return 1\n\ndef b():\n    return 2\n";
        let new = "def a():\n    return 9\n\ndef b():\n    return 3\n";
        assert!(matches!(
            pair_changed_functions(old, new),
            Err(DifferError::MultipleChanged(_))
        ));
        assert!(matches!(
            pair_changed_functions(old, old),
            Err(DifferError::NoChange)
        ));
    }
}
