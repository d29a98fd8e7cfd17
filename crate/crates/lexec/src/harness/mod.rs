//! Batch driver: lexecutes snippets under a chosen predictor and
//! configuration, measuring line coverage, full-execution rates, and
//! timings.

pub mod batch;
pub mod stats;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use lexec_lang::lexer::lex;
use lexec_lang::parse_program;

use crate::abstraction::{ConcretizationMode, Granularity};
use crate::engine::{
    run_plain, run_unit, EngineConfig, EngineSession, InjectionEvent, TerminalException,
};
use crate::instrument::{instrument_source, InstrumentError};
use crate::predict::Predictor;

pub use batch::{load_corpus, run_batch, write_batch_csv, write_batch_json, BatchSummary, Snippet};
pub use stats::{compare_summaries, wilcoxon_signed_rank, ComparisonReport, WilcoxonResult};

/// Flag strings attached to reports.
pub const FLAG_SYNTAX_ERROR: &str = "syntax-error";
pub const FLAG_TIMED_OUT: &str = "timed-out";
/// The countable-line denominator includes body lines of functions that
/// were never invoked during the run.
pub const FLAG_UNCALLED_FUNCTION_LINES: &str = "uncalled-function-lines";

/// Outcome of one guarded (or as-is) execution of a snippet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub snippet: String,
    pub config: String,
    /// Non-empty, non-comment lines (lexer-determined).
    pub countable_lines: BTreeSet<u32>,
    /// Lines that began executing.
    pub executed_lines: BTreeSet<u32>,
    /// Lines that completed without hosting a raise.
    pub covered_lines: BTreeSet<u32>,
    pub terminal_exception: Option<TerminalException>,
    pub injections: Vec<InjectionEvent>,
    pub degraded_events: Vec<String>,
    pub duration_ms: f64,
    pub flags: Vec<String>,
}

impl RunReport {
    pub fn syntax_error(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_SYNTAX_ERROR)
    }

    pub fn timed_out(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_TIMED_OUT)
    }

    /// Fraction of countable lines covered. Syntax errors count as zero;
    /// an empty snippet trivially counts as fully executed.
    pub fn coverage(&self) -> f64 {
        if self.syntax_error() {
            return 0.0;
        }
        if self.countable_lines.is_empty() {
            return 1.0;
        }
        let hit = self
            .covered_lines
            .intersection(&self.countable_lines)
            .count();
        hit as f64 / self.countable_lines.len() as f64
    }

    pub fn fully_executed(&self) -> bool {
        (self.coverage() - 1.0).abs() < f64::EPSILON
    }

    /// Everything except the wall-clock fields, for determinism checks.
    pub fn deterministic_view(&self) -> impl PartialEq + std::fmt::Debug + '_ {
        (
            &self.snippet,
            &self.config,
            &self.countable_lines,
            &self.executed_lines,
            &self.covered_lines,
            &self.terminal_exception,
            self.injections
                .iter()
                .map(|i| {
                    (
                        i.iid,
                        i.name.clone(),
                        i.kind,
                        i.predicted.clone(),
                        i.summary.clone(),
                        i.degraded,
                    )
                })
                .collect::<Vec<_>>(),
            &self.flags,
        )
    }
}

/// How a run resolves missing values: not at all (the as-is baseline) or
/// through a predictor-driven engine session.
#[derive(Clone)]
pub enum RunPredictor {
    AsIs,
    Injecting(Arc<dyn Predictor>),
}

#[derive(Clone)]
pub struct RunConfig {
    pub id: String,
    pub predictor: RunPredictor,
    pub granularity: Granularity,
    pub mode: ConcretizationMode,
    pub seed: u64,
    pub timeout: Duration,
    pub window: usize,
}

impl RunConfig {
    pub fn as_is(id: impl Into<String>) -> RunConfig {
        RunConfig {
            id: id.into(),
            predictor: RunPredictor::AsIs,
            granularity: Granularity::Fine,
            mode: ConcretizationMode::Deterministic,
            seed: 0,
            timeout: Duration::from_secs(10),
            window: crate::engine::DEFAULT_WINDOW,
        }
    }

    pub fn injecting(
        id: impl Into<String>,
        predictor: Arc<dyn Predictor>,
        granularity: Granularity,
        mode: ConcretizationMode,
        seed: u64,
    ) -> RunConfig {
        RunConfig {
            id: id.into(),
            predictor: RunPredictor::Injecting(predictor),
            granularity,
            mode,
            seed,
            timeout: Duration::from_secs(10),
            window: crate::engine::DEFAULT_WINDOW,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> RunConfig {
        self.timeout = timeout;
        self
    }
}

/// A report plus the snippet's captured standard output.
#[derive(Debug, Clone)]
pub struct SnippetRun {
    pub report: RunReport,
    pub output: String,
}

/// Executes one snippet under one configuration.
pub fn run_snippet(source: &str, snippet_id: &str, cfg: &RunConfig) -> SnippetRun {
    let countable = match lex(source) {
        Ok(out) => out.code_lines,
        Err(_) => BTreeSet::new(),
    };

    let syntax_report = |message: String| SnippetRun {
        report: RunReport {
            snippet: snippet_id.to_string(),
            config: cfg.id.clone(),
            countable_lines: countable.clone(),
            executed_lines: BTreeSet::new(),
            covered_lines: BTreeSet::new(),
            terminal_exception: Some(TerminalException {
                exc_type: "SyntaxError".to_string(),
                message,
                line: None,
            }),
            injections: Vec::new(),
            degraded_events: Vec::new(),
            duration_ms: 0.0,
            flags: vec![FLAG_SYNTAX_ERROR.to_string()],
        },
        output: String::new(),
    };

    let outcome = match &cfg.predictor {
        RunPredictor::AsIs => match run_plain(source, Some(cfg.timeout)) {
            Ok(outcome) => outcome,
            Err(e) => return syntax_report(e.to_string()),
        },
        RunPredictor::Injecting(predictor) => {
            let unit = match instrument_source(source, snippet_id) {
                Ok(unit) => unit,
                Err(InstrumentError::Syntax { message, line, .. }) => {
                    return syntax_report(format!("line {line}: {message}"))
                }
                Err(other) => return syntax_report(other.to_string()),
            };
            let config = EngineConfig {
                granularity: cfg.granularity,
                mode: cfg.mode,
                seed: cfg.seed,
                window: cfg.window,
            };
            let session = EngineSession::guided(&unit, predictor.clone(), &config);
            match run_unit(&unit, &session, Some(cfg.timeout)) {
                Ok(outcome) => outcome,
                Err(e) => return syntax_report(e.to_string()),
            }
        }
    };

    let mut flags = Vec::new();
    if outcome.timed_out {
        flags.push(FLAG_TIMED_OUT.to_string());
    }
    if let Ok(program) = parse_program(source) {
        let def_lines = program.def_body_lines();
        let uncalled = def_lines
            .intersection(&countable)
            .any(|l| !outcome.executed_lines.contains(l));
        if uncalled {
            flags.push(FLAG_UNCALLED_FUNCTION_LINES.to_string());
        }
    }

    SnippetRun {
        report: RunReport {
            snippet: snippet_id.to_string(),
            config: cfg.id.clone(),
            countable_lines: countable,
            executed_lines: outcome.executed_lines,
            covered_lines: outcome.covered_lines,
            terminal_exception: outcome.terminal,
            injections: outcome.injections,
            degraded_events: outcome.degraded_events,
            duration_ms: outcome.duration.as_secs_f64() * 1000.0,
            flags,
        },
        output: outcome.output,
    }
}
