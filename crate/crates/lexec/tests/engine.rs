//! Runtime-engine contract: pass-through purity, interception scope,
//! consistency caching, and injected-value semantics.

use std::sync::Arc;

use lexec::abstraction::{
    AbstractClass, ConcretizationMode, FineClass, Granularity,
};
use lexec::engine::{run_unit, EngineConfig, EngineSession};
use lexec::instrument::instrument_source;
use lexec::predict::baselines::{NaivePredictor, StubPredictor};
use lexec::predict::{
    PredictError, Predictor, PredictorQuery, PredictorResponse,
};
use lexec::ValueKind;

fn config(granularity: Granularity, mode: ConcretizationMode, seed: u64) -> EngineConfig {
    EngineConfig::new(granularity, mode, seed).unwrap()
}

fn guided_run(
    source: &str,
    predictor: Arc<dyn Predictor>,
    cfg: &EngineConfig,
) -> (lexec::engine::RunOutcome, EngineSession) {
    let unit = instrument_source(source, "t.py").expect("instrument");
    let session = EngineSession::guided(&unit, predictor, cfg);
    let outcome = run_unit(&unit, &session, Some(std::time::Duration::from_secs(5))).unwrap();
    (outcome, session)
}

#[test]
fn defined_names_pass_through_without_queries() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run("x = 7\nprint(x)\n", Arc::new(NaivePredictor), &cfg);
    assert_eq!(outcome.output, "7\n");
    assert!(outcome.terminal.is_none());
    assert!(session.injections().is_empty(), "no queries expected");
}

#[test]
fn undefined_list_injection() {
    let stub = StubPredictor::from_pairs(&[("all_data", ValueKind::Variable, "list_nonempty")]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run(
        "print(len(all_data), type(all_data), type(all_data[0]))\n",
        Arc::new(stub),
        &cfg,
    );
    assert!(outcome.terminal.is_none());
    // A one-element list containing an injected placeholder object.
    assert_eq!(outcome.output, "1 list Dummy\n");
    let inj = session.injections();
    assert_eq!(inj.len(), 1);
    assert_eq!(inj[0].predicted, "list_nonempty");
    assert_eq!(inj[0].kind, ValueKind::Variable);
}

#[test]
fn repeated_reads_hit_the_cache_once() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "a = ghost\nb = ghost\nprint(a is b)\n";
    let (outcome, session) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert_eq!(outcome.output, "True\n");
    assert_eq!(session.injections().len(), 1, "one query for two reads");
}

#[test]
fn missing_attribute_on_dummy_injects_callable() {
    let stub = StubPredictor::from_pairs(&[
        ("logger", ValueKind::Variable, "object"),
        ("info", ValueKind::Attribute, "callable"),
        ("info", ValueKind::ReturnValue, "none"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run("r = logger.info('msg')\nprint(r)\n", Arc::new(stub), &cfg);
    assert!(outcome.terminal.is_none());
    assert_eq!(outcome.output, "None\n");
    let injections = session.injections();
    assert_eq!(injections.len(), 3);
    assert_eq!(injections[0].kind, ValueKind::Variable);
    assert_eq!(injections[1].kind, ValueKind::Attribute);
    assert_eq!(injections[1].predicted, "callable");
    assert_eq!(injections[2].kind, ValueKind::ReturnValue);
    assert_eq!(injections[2].predicted, "none");
}

#[test]
fn real_attributes_pass_through() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    // Write an attribute onto an injected object, then read it back: the
    // read succeeds for real, no second query for the attribute.
    let src = "holder.slot = 3\nprint(holder.slot)\n";
    let (outcome, session) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert_eq!(outcome.output, "3\n");
    let attr_queries = session
        .injections()
        .iter()
        .filter(|i| i.kind == ValueKind::Attribute)
        .count();
    assert_eq!(attr_queries, 0, "attribute read was real");
    // Only the two reads of the undefined name `holder` query (cached to 1).
    assert_eq!(session.injections().len(), 1);
}

#[test]
fn same_base_and_attribute_query_once() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "a = cfg.flag\nb = cfg.flag\nprint(a is b)\n";
    let (outcome, session) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert_eq!(outcome.output, "True\n");
    let attr_queries = session
        .injections()
        .iter()
        .filter(|i| i.kind == ValueKind::Attribute)
        .count();
    assert_eq!(attr_queries, 1);
}

#[test]
fn regular_callees_are_invoked() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "def f():\n    return 42\nprint(f())\n";
    let (outcome, session) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert_eq!(outcome.output, "42\n");
    assert!(session.injections().is_empty());
}

#[test]
fn injected_callee_returns_predicted_value_without_executing() {
    let stub = StubPredictor::from_pairs(&[
        ("has_min_size", ValueKind::Variable, "callable"),
        ("has_min_size", ValueKind::ReturnValue, "true"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, _) = guided_run("print(has_min_size([1]))\n", Arc::new(stub), &cfg);
    assert_eq!(outcome.output, "True\n");
}

#[test]
fn arguments_of_injected_callees_still_evaluate() {
    let stub = StubPredictor::from_pairs(&[
        ("sink", ValueKind::Variable, "callable"),
        ("sink", ValueKind::ReturnValue, "none"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "\
effects = []
def observed():
    effects.append(1)
    return 9
sink(observed())
print(effects)
";
    let (outcome, _) = guided_run(src, Arc::new(stub), &cfg);
    assert_eq!(outcome.output, "[1]\n", "argument side effects must run");
}

#[test]
fn engine_does_not_suppress_explicit_raises() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, _) = guided_run("raise ValueError('nope')\n", Arc::new(NaivePredictor), &cfg);
    let term = outcome.terminal.expect("terminal exception");
    assert_eq!(term.exc_type, "ValueError");
    assert_eq!(term.line, Some(1));
}

#[test]
fn user_raised_name_errors_propagate() {
    // Only undefined-name errors arising inside loader accessors trigger
    // prediction; an explicit raise of the same kind is not intercepted.
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run(
        "raise NameError('synthetic')\n",
        Arc::new(NaivePredictor),
        &cfg,
    );
    let term = outcome.terminal.expect("terminal exception");
    assert_eq!(term.exc_type, "NameError");
    assert!(session.injections().is_empty());
}

#[test]
fn logic_errors_propagate() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, _) = guided_run("d = {}\nx = d['missing']\n", Arc::new(NaivePredictor), &cfg);
    let term = outcome.terminal.expect("terminal exception");
    assert_eq!(term.exc_type, "KeyError");
    assert_eq!(term.line, Some(2));
}

#[test]
fn naive_predictor_reaches_full_coverage_on_simple_missing_name() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "value = mystery\nprint(type(value))\n";
    let (outcome, _) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert!(outcome.terminal.is_none());
    assert_eq!(outcome.output, "Dummy\n");
    assert_eq!(
        outcome.covered_lines.iter().copied().collect::<Vec<_>>(),
        vec![1, 2]
    );
}

#[test]
fn consistency_across_all_three_configurations() {
    let src = "\
v1 = ghost
v2 = ghost
v3 = ghost
v4 = ghost
print(v1 is v2 and v2 is v3 and v3 is v4 and v4 is ghost)
";
    let configs = [
        config(Granularity::Fine, ConcretizationMode::Deterministic, 3),
        config(Granularity::Coarse, ConcretizationMode::Deterministic, 3),
        config(Granularity::Coarse, ConcretizationMode::Randomized, 3),
    ];
    for cfg in configs {
        let (outcome, session) = guided_run(src, Arc::new(NaivePredictor), &cfg);
        assert_eq!(outcome.output, "True\n");
        assert_eq!(
            session.injections().len(),
            1,
            "five reads, one query ({:?} {:?})",
            cfg.granularity,
            cfg.mode
        );
    }
}

#[test]
fn injected_callable_invoked_by_builtin_internals_returns_fresh_dummies() {
    let stub = StubPredictor::from_pairs(&[("transform", ValueKind::Variable, "callable")]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    // `map` invokes the injected callable internally (outside the call
    // loader): each invocation yields a fresh placeholder, nothing executes.
    let src = "\
rs = map(transform, [1, 2])
print(len(rs), type(rs[0]), type(rs[1]), rs[0] is rs[1])
";
    let (outcome, _) = guided_run(src, Arc::new(stub), &cfg);
    assert_eq!(outcome.output, "2 Dummy Dummy False\n");
}

// A predictor with a fixed multi-element ranking, for top-1 usage checks.
struct RankedStub(Vec<FineClass>);

impl Predictor for RankedStub {
    fn describe(&self) -> String {
        "ranked-stub".to_string()
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        let n = self.0.len() as f64;
        let ranked = self
            .0
            .iter()
            .enumerate()
            .map(|(i, c)| (AbstractClass::Fine(*c), (n - i as f64) / n))
            .collect();
        PredictorResponse::try_new(query.granularity, query.top_k.max(self.0.len()), ranked)
            .map_err(|e| PredictError::Internal(e.to_string()))
    }
}

#[test]
fn engine_consumes_exactly_the_top_prediction() {
    let predictor = RankedStub(vec![FineClass::IntNeg, FineClass::IntPos, FineClass::None]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run("print(amount)\n", Arc::new(predictor), &cfg);
    assert_eq!(outcome.output, "-1\n");
    assert_eq!(session.injections()[0].predicted, "int_neg");
}

struct FailingPredictor;

impl Predictor for FailingPredictor {
    fn describe(&self) -> String {
        "failing".to_string()
    }

    fn predict(&self, _query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        Err(PredictError::Transport("model host is down".to_string()))
    }
}

#[test]
fn predictor_failure_degrades_to_naive_object() {
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, session) = guided_run(
        "x = unreachable_value\nprint(type(x))\n",
        Arc::new(FailingPredictor),
        &cfg,
    );
    assert!(outcome.terminal.is_none());
    assert_eq!(outcome.output, "Dummy\n");
    let inj = session.injections();
    assert_eq!(inj.len(), 1);
    assert!(inj[0].degraded);
    assert_eq!(inj[0].predicted, "object");
    assert_eq!(session.degraded_events().len(), 1);
}

#[test]
fn resource_injection_supports_with_statements() {
    let stub = StubPredictor::from_pairs(&[
        ("open", ValueKind::Variable, "callable"),
        ("open", ValueKind::ReturnValue, "resource"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "\
with open('log.txt') as handle:
    print(type(handle))
";
    let (outcome, _) = guided_run(src, Arc::new(stub), &cfg);
    assert!(outcome.terminal.is_none());
    assert_eq!(outcome.output, "DummyResource\n");
}

#[test]
fn injected_callable_return_is_cached_by_callee_identity() {
    // Two textually distinct call sites of the same injected callable get
    // the same injected return value from one query.
    let stub = StubPredictor::from_pairs(&[
        ("ghost_fn", ValueKind::Variable, "callable"),
        ("ghost_fn", ValueKind::ReturnValue, "object"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let src = "f = ghost_fn\na = f()\nb = f()\nprint(a is b)\n";
    let (outcome, session) = guided_run(src, Arc::new(stub), &cfg);
    assert_eq!(outcome.output, "True\n");
    let return_queries = session
        .injections()
        .iter()
        .filter(|i| i.kind == ValueKind::ReturnValue)
        .count();
    assert_eq!(return_queries, 1);
}

#[test]
fn distinct_injected_callables_get_distinct_returns() {
    // Each concretized callable is a fresh identity, so different missing
    // functions can receive different predicted returns.
    let stub = StubPredictor::from_pairs(&[
        ("check", ValueKind::Variable, "callable"),
        ("check", ValueKind::ReturnValue, "true"),
        ("emit", ValueKind::Variable, "callable"),
        ("emit", ValueKind::ReturnValue, "none"),
    ]);
    let cfg = config(Granularity::Fine, ConcretizationMode::Deterministic, 0);
    let (outcome, _) = guided_run("print(check(), emit())\n", Arc::new(stub), &cfg);
    assert_eq!(outcome.output, "True None\n");
}

#[test]
fn fine_randomized_configuration_is_rejected() {
    assert!(EngineConfig::new(Granularity::Fine, ConcretizationMode::Randomized, 0).is_err());
}

#[test]
fn deterministic_given_seed_in_randomized_mode() {
    let cfg = config(Granularity::Coarse, ConcretizationMode::Randomized, 99);
    let src = "a = first_missing\nb = second_missing\nprint(type(a), type(b))\n";
    let (o1, s1) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    let (o2, s2) = guided_run(src, Arc::new(NaivePredictor), &cfg);
    assert_eq!(o1.output, o2.output);
    let summaries = |s: &EngineSession| {
        s.injections()
            .iter()
            .map(|i| (i.predicted.clone(), i.summary.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(summaries(&s1), summaries(&s2));
}
