//! The runtime engine: binds the three loaders to a session that loads real
//! values when possible and otherwise predicts, concretizes, caches, and
//! injects.
//!
//! Interception is deliberately narrow: only the undefined-name error from
//! a name-loader accessor, the missing-member error from the attribute
//! loader's own read, and calls whose callee carries the injected-value
//! marker trigger prediction. Everything else propagates, so logic errors
//! stay visible.
//!
//! Consistency: one cache per session, keyed by variable name, by
//! (base identity, attribute name), or by callee identity. Repeated uses of
//! the same missing value observe the same injected value in every mode.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lexec_lang::builtins::make_builtin;
use lexec_lang::interp::LineTracker;
use lexec_lang::value::DummyObj;
use lexec_lang::{parse_program, ExcKind, HostError, Interp, LoaderSet, Value};

use crate::abstraction::{
    abstract_fine, concretize, AbstractClass, CoarseClass, ConcretizationMode, FineClass,
    Granularity,
};
use crate::instrument::{build_model_input, IidMetadata, InstrumentedUnit, PREAMBLE_LINES};
use crate::predict::{Predictor, PredictorResponse};
use crate::ValueKind;

/// Default context-window budget (tokens) for engine-built queries.
pub const DEFAULT_WINDOW: usize = 512;

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub granularity: Granularity,
    pub mode: ConcretizationMode,
    pub seed: u64,
    pub window: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("randomized concretization requires coarse granularity")]
    RandomizedRequiresCoarse,
    #[error("instrumented unit does not parse: {0}")]
    BadUnit(String),
}

impl EngineConfig {
    pub fn new(
        granularity: Granularity,
        mode: ConcretizationMode,
        seed: u64,
    ) -> Result<EngineConfig, EngineError> {
        if granularity == Granularity::Fine && mode == ConcretizationMode::Randomized {
            return Err(EngineError::RandomizedRequiresCoarse);
        }
        Ok(EngineConfig {
            granularity,
            mode,
            seed,
            window: DEFAULT_WINDOW,
        })
    }

    pub fn with_window(mut self, window: usize) -> EngineConfig {
        self.window = window;
        self
    }
}

/// One injected value, recorded per predictor query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionEvent {
    pub iid: u32,
    pub name: String,
    pub kind: ValueKind,
    /// Label of the class the injection used.
    pub predicted: String,
    /// Short rendering of the injected value.
    pub summary: String,
    /// True when the predictor failed and the engine fell back to the
    /// naive `object` prediction.
    pub degraded: bool,
}

/// A value-use observed by a record-mode session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedUse {
    pub iid: u32,
    pub name: String,
    pub kind: ValueKind,
    pub fine: FineClass,
}

enum SessionMode {
    Guided { predictor: Arc<dyn Predictor> },
    Record,
}

struct SessionState {
    mode: SessionMode,
    granularity: Granularity,
    cmode: ConcretizationMode,
    window: usize,
    rng: ChaCha8Rng,
    file: String,
    original: String,
    metadata: Vec<IidMetadata>,
    name_cache: HashMap<String, Value>,
    attr_cache: Vec<(Value, String, Value)>,
    return_cache: Vec<(Value, Value)>,
    injections: Vec<InjectionEvent>,
    degraded_events: Vec<String>,
    recorded: Vec<RecordedUse>,
    record_failure: Option<String>,
}

impl SessionState {
    fn meta(&self, iid: u32) -> Option<&IidMetadata> {
        self.metadata.get(iid as usize).filter(|m| m.iid == iid)
    }

    fn describe_site(&self, iid: u32, fallback_name: &str, kind: ValueKind) -> (String, ValueKind) {
        match self.meta(iid) {
            Some(m) => (m.name.clone(), m.kind),
            None => (fallback_name.to_string(), kind),
        }
    }

    fn observe(&mut self, iid: u32, fallback_name: &str, kind: ValueKind, value: &Value) {
        if matches!(self.mode, SessionMode::Record) {
            let (name, kind) = self.describe_site(iid, fallback_name, kind);
            self.recorded.push(RecordedUse {
                iid,
                name,
                kind,
                fine: abstract_fine(value),
            });
        }
    }

    /// Predict, concretize, cache, log. Reaching this point means the real
    /// load failed with the interceptable error for `kind`.
    fn inject(&mut self, iid: u32, fallback_name: &str, kind: ValueKind) -> Result<Value, HostError> {
        let predictor = match &self.mode {
            SessionMode::Guided { predictor } => predictor.clone(),
            SessionMode::Record => {
                let (name, kind) = self.describe_site(iid, fallback_name, kind);
                let msg = format!(
                    "missing value during record run: {} '{}' (iid {})",
                    kind.as_str(),
                    name,
                    iid
                );
                self.record_failure = Some(msg.clone());
                return Err(HostError::new(ExcKind::RuntimeError, msg));
            }
        };
        let (name, kind) = self.describe_site(iid, fallback_name, kind);
        let response = self.query_predictor(&predictor, iid, &name, kind);
        let (class, degraded) = match response {
            Ok(resp) => (resp.top1(), false),
            Err(err) => {
                self.degraded_events.push(format!(
                    "predictor failure for {} '{}' (iid {}): {}",
                    kind.as_str(),
                    name,
                    iid,
                    err
                ));
                (naive_fallback_class(self.granularity), true)
            }
        };
        let value = concretize(class, self.cmode, &mut self.rng)
            .expect("session mode validated at construction");
        self.injections.push(InjectionEvent {
            iid,
            name,
            kind,
            predicted: class.label().to_string(),
            summary: value.to_repr_string(),
            degraded,
        });
        Ok(value)
    }

    fn query_predictor(
        &self,
        predictor: &Arc<dyn Predictor>,
        iid: u32,
        name: &str,
        kind: ValueKind,
    ) -> Result<PredictorResponse, crate::predict::PredictError> {
        let query = match self.meta(iid) {
            Some(meta) => build_model_input(meta, &self.original, self.window, self.granularity, 1)
                .unwrap_or_else(|_| {
                    crate::predict::PredictorQuery::new(name, kind, self.granularity, 1)
                }),
            None => crate::predict::PredictorQuery::new(name, kind, self.granularity, 1),
        };
        predictor.predict(&query)
    }

    fn cached_attr(&self, base: &Value, attr: &str) -> Option<Value> {
        self.attr_cache
            .iter()
            .find(|(b, a, _)| a == attr && b.identical(base))
            .map(|(_, _, v)| v.clone())
    }

    fn cached_return(&self, callee: &Value) -> Option<Value> {
        self.return_cache
            .iter()
            .find(|(c, _)| c.identical(callee))
            .map(|(_, v)| v.clone())
    }
}

fn naive_fallback_class(granularity: Granularity) -> AbstractClass {
    match granularity {
        Granularity::Fine => AbstractClass::Fine(FineClass::Object),
        Granularity::Coarse => AbstractClass::Coarse(CoarseClass::Object),
    }
}

/// A session drives exactly one guarded (or record-mode) execution; caches
/// never persist across snippets.
pub struct EngineSession {
    state: Rc<RefCell<SessionState>>,
}

impl EngineSession {
    pub fn guided(
        unit: &InstrumentedUnit,
        predictor: Arc<dyn Predictor>,
        config: &EngineConfig,
    ) -> EngineSession {
        EngineSession {
            state: Rc::new(RefCell::new(SessionState {
                mode: SessionMode::Guided { predictor },
                granularity: config.granularity,
                cmode: config.mode,
                window: config.window,
                rng: ChaCha8Rng::seed_from_u64(config.seed),
                file: unit.file.clone(),
                original: unit.original.clone(),
                metadata: unit.metadata.clone(),
                name_cache: HashMap::new(),
                attr_cache: Vec::new(),
                return_cache: Vec::new(),
                injections: Vec::new(),
                degraded_events: Vec::new(),
                recorded: Vec::new(),
                record_failure: None,
            })),
        }
    }

    pub fn record(unit: &InstrumentedUnit) -> EngineSession {
        EngineSession {
            state: Rc::new(RefCell::new(SessionState {
                mode: SessionMode::Record,
                granularity: Granularity::Fine,
                cmode: ConcretizationMode::Deterministic,
                window: DEFAULT_WINDOW,
                rng: ChaCha8Rng::seed_from_u64(0),
                file: unit.file.clone(),
                original: unit.original.clone(),
                metadata: unit.metadata.clone(),
                name_cache: HashMap::new(),
                attr_cache: Vec::new(),
                return_cache: Vec::new(),
                injections: Vec::new(),
                degraded_events: Vec::new(),
                recorded: Vec::new(),
                record_failure: None,
            })),
        }
    }

    /// The loader bindings instrumented code imports.
    pub fn loaders(&self) -> LoaderSet {
        let name_state = self.state.clone();
        let name_loader = make_builtin(lexec_lang::NAME_LOADER_FN, move |interp, args, _kw| {
            let (iid, name, accessor) = parse_name_args(&args)?;
            // Phase 1 (no session borrow): attempt the real read.
            match interp.call_value(&accessor, Vec::new(), Vec::new()) {
                Ok(v) => {
                    name_state
                        .borrow_mut()
                        .observe(iid, &name, ValueKind::Variable, &v);
                    Ok(v)
                }
                Err(e) if e.kind == ExcKind::NameError => {
                    let mut state = name_state.borrow_mut();
                    if let Some(v) = state.name_cache.get(&name) {
                        return Ok(v.clone());
                    }
                    let v = state.inject(iid, &name, ValueKind::Variable)?;
                    state.name_cache.insert(name, v.clone());
                    Ok(v)
                }
                Err(e) => Err(e),
            }
        });

        let attr_state = self.state.clone();
        let attr_loader = make_builtin(lexec_lang::ATTR_LOADER_FN, move |_interp, args, _kw| {
            let (iid, base, attr) = parse_attr_args(&args)?;
            match lexec_lang::builtins::get_attr(&base, &attr) {
                Ok(v) => {
                    attr_state
                        .borrow_mut()
                        .observe(iid, &attr, ValueKind::Attribute, &v);
                    Ok(v)
                }
                Err(e) if e.kind == ExcKind::AttributeError => {
                    let mut state = attr_state.borrow_mut();
                    if let Some(v) = state.cached_attr(&base, &attr) {
                        return Ok(v);
                    }
                    let v = state.inject(iid, &attr, ValueKind::Attribute)?;
                    state.attr_cache.push((base, attr, v.clone()));
                    Ok(v)
                }
                Err(e) => Err(e),
            }
        });

        let call_state = self.state.clone();
        let call_loader = make_builtin(lexec_lang::CALL_LOADER_FN, move |interp, args, kwargs| {
            let (iid, callee, rest) = parse_call_args(args)?;
            if callee.is_engine_injected_marker() {
                // Arguments were already evaluated by the caller (their own
                // instrumentation ran); they are discarded here because only
                // the return value is predicted.
                let mut state = call_state.borrow_mut();
                if let Some(v) = state.cached_return(&callee) {
                    return Ok(v);
                }
                let v = state.inject(iid, "<injected>", ValueKind::ReturnValue)?;
                state.return_cache.push((callee, v.clone()));
                Ok(v)
            } else {
                let v = interp.call_value(&callee, rest, kwargs)?;
                call_state
                    .borrow_mut()
                    .observe(iid, "<call>", ValueKind::ReturnValue, &v);
                Ok(v)
            }
        });

        LoaderSet {
            name_loader,
            attr_loader,
            call_loader,
        }
    }

    pub fn injections(&self) -> Vec<InjectionEvent> {
        self.state.borrow().injections.clone()
    }

    pub fn degraded_events(&self) -> Vec<String> {
        self.state.borrow().degraded_events.clone()
    }

    pub fn recorded_uses(&self) -> Vec<RecordedUse> {
        self.state.borrow().recorded.clone()
    }

    pub fn record_failure(&self) -> Option<String> {
        self.state.borrow().record_failure.clone()
    }

    pub fn file(&self) -> String {
        self.state.borrow().file.clone()
    }

    /// A fresh injected callable, for tests that need marker values.
    pub fn fresh_injected_callable() -> Value {
        Value::DummyCallable(DummyObj::fresh())
    }
}

fn parse_name_args(args: &[Value]) -> Result<(u32, String, Value), HostError> {
    let iid = match args.first() {
        Some(Value::Int(i)) if *i >= 0 => *i as u32,
        _ => return Err(loader_misuse("name loader expects (iid, name, accessor)")),
    };
    let name = match args.get(1) {
        Some(Value::Str(s)) => s.as_ref().clone(),
        _ => return Err(loader_misuse("name loader expects a string name")),
    };
    let accessor = match args.get(2) {
        Some(v) => v.clone(),
        None => return Err(loader_misuse("name loader expects an accessor")),
    };
    Ok((iid, name, accessor))
}

fn parse_attr_args(args: &[Value]) -> Result<(u32, Value, String), HostError> {
    let iid = match args.first() {
        Some(Value::Int(i)) if *i >= 0 => *i as u32,
        _ => return Err(loader_misuse("attribute loader expects (iid, base, attr)")),
    };
    let base = match args.get(1) {
        Some(v) => v.clone(),
        None => return Err(loader_misuse("attribute loader expects a base value")),
    };
    let attr = match args.get(2) {
        Some(Value::Str(s)) => s.as_ref().clone(),
        _ => return Err(loader_misuse("attribute loader expects a string attribute name")),
    };
    Ok((iid, base, attr))
}

fn parse_call_args(mut args: Vec<Value>) -> Result<(u32, Value, Vec<Value>), HostError> {
    if args.len() < 2 {
        return Err(loader_misuse("call loader expects (iid, callee, ...args)"));
    }
    let rest = args.split_off(2);
    let callee = args.pop().unwrap();
    let iid = match args.pop() {
        Some(Value::Int(i)) if i >= 0 => i as u32,
        _ => return Err(loader_misuse("call loader expects an integer iid")),
    };
    Ok((iid, callee, rest))
}

fn loader_misuse(msg: &str) -> HostError {
    HostError::new(ExcKind::TypeError, msg)
}

// ---------------------------------------------------------------------------
// Guarded execution

/// Terminal failure of a run, with the line mapped back to the original
/// source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalException {
    pub exc_type: String,
    pub message: String,
    pub line: Option<u32>,
}

/// Everything observable from one guarded execution.
#[derive(Debug)]
pub struct RunOutcome {
    /// Original-source lines that began executing.
    pub executed_lines: std::collections::BTreeSet<u32>,
    /// Original-source lines that completed without hosting a raise.
    pub covered_lines: std::collections::BTreeSet<u32>,
    pub terminal: Option<TerminalException>,
    pub timed_out: bool,
    pub injections: Vec<InjectionEvent>,
    pub degraded_events: Vec<String>,
    pub output: String,
    pub duration: Duration,
    /// Final global bindings, for callers that inspect results (the commit
    /// differ reads its capture variables from here).
    pub globals: Vec<(String, Value)>,
}

/// Runs an instrumented unit under the given session with the loaders
/// bound, mapping all line numbers back to the original source.
pub fn run_unit(
    unit: &InstrumentedUnit,
    session: &EngineSession,
    timeout: Option<Duration>,
) -> Result<RunOutcome, EngineError> {
    let program =
        parse_program(&unit.instrumented).map_err(|e| EngineError::BadUnit(e.to_string()))?;

    let mut interp = Interp::new();
    let tracker = Rc::new(RefCell::new(LineTracker::default()));
    interp.tracker = Some(tracker.clone());
    interp.loaders = session.loaders();
    if let Some(t) = timeout {
        interp.deadline = Some(Instant::now() + t);
    }

    let globals = interp.new_globals();
    let started = Instant::now();
    let result = interp.run_program(&program, &globals);
    let duration = started.elapsed();

    let map_line = |l: u32| l.checked_sub(PREAMBLE_LINES).filter(|m| *m >= 1);

    let tracker = tracker.borrow();
    let executed_lines = tracker
        .executed_lines()
        .iter()
        .filter_map(|l| map_line(*l))
        .collect();
    let covered_lines = tracker
        .covered_lines()
        .iter()
        .filter_map(|l| map_line(*l))
        .collect();

    let mut timed_out = false;
    let terminal = match result {
        Ok(()) => None,
        Err(e) if e.kind == ExcKind::Timeout => {
            timed_out = true;
            None
        }
        Err(e) => Some(TerminalException {
            exc_type: e.kind.name().to_string(),
            message: e.message.clone(),
            line: e.line.and_then(map_line),
        }),
    };

    let globals_snapshot = globals.snapshot();
    Ok(RunOutcome {
        executed_lines,
        covered_lines,
        terminal,
        timed_out,
        injections: session.injections(),
        degraded_events: session.degraded_events(),
        output: interp.output_string(),
        duration,
        globals: globals_snapshot,
    })
}

/// Runs uninstrumented source with the same observability as [`run_unit`];
/// the as-is baseline and record-transparency checks build on this.
pub fn run_plain(source: &str, timeout: Option<Duration>) -> Result<RunOutcome, lexec_lang::LangError> {
    let program = parse_program(source)?;
    let mut interp = Interp::new();
    let tracker = Rc::new(RefCell::new(LineTracker::default()));
    interp.tracker = Some(tracker.clone());
    if let Some(t) = timeout {
        interp.deadline = Some(Instant::now() + t);
    }
    let globals = interp.new_globals();
    let started = Instant::now();
    let result = interp.run_program(&program, &globals);
    let duration = started.elapsed();

    let tracker = tracker.borrow();
    let mut timed_out = false;
    let terminal = match result {
        Ok(()) => None,
        Err(e) if e.kind == ExcKind::Timeout => {
            timed_out = true;
            None
        }
        Err(e) => Some(TerminalException {
            exc_type: e.kind.name().to_string(),
            message: e.message.clone(),
            line: e.line,
        }),
    };
    Ok(RunOutcome {
        executed_lines: tracker.executed_lines().clone(),
        covered_lines: tracker.covered_lines(),
        terminal,
        timed_out,
        injections: Vec::new(),
        degraded_events: Vec::new(),
        output: interp.output_string(),
        duration,
        globals: globals.snapshot(),
    })
}
