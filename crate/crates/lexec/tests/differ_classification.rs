//! End-to-end behavioral diffing of function pairs.

use std::sync::Arc;

use lexec::differ::{
    classify, DiffOutcome, DifferConfig, DifferenceRule, FunctionPair,
};
use lexec::predict::baselines::{NaivePredictor, StubPredictor};
use lexec::ValueKind;

fn classify_pair(old: &str, new: &str, predictor: Arc<dyn lexec::predict::Predictor>) -> DiffOutcome {
    let pair = FunctionPair::parse(old, new).expect("pair parses");
    classify(&pair, predictor, &DifferConfig::default()).outcome
}

#[test]
fn identical_functions_are_same_behavior() {
    let f = "def compute():\n    return 1\n";
    let outcome = classify_pair(f, f, Arc::new(NaivePredictor));
    assert!(matches!(outcome, DiffOutcome::SameBehavior), "{outcome:?}");
}

#[test]
fn new_version_raising_is_exceptional() {
    let old = "def compute():\n    return 1\n";
    let new = "def compute():\n    raise ValueError('boom')\n";
    let outcome = classify_pair(old, new, Arc::new(NaivePredictor));
    match outcome {
        DiffOutcome::Exceptional { detail } => assert!(detail.contains("ValueError")),
        other => panic!("expected exceptional, got {other:?}"),
    }
}

#[test]
fn primitive_value_change_is_semantics_changing_rule_ii() {
    let old = "def compute():\n    return 0\n";
    let new = "def compute():\n    return 1\n";
    let outcome = classify_pair(old, new, Arc::new(NaivePredictor));
    match outcome {
        DiffOutcome::SemanticsChanging { rule, .. } => {
            assert_eq!(rule, DifferenceRule::PrimitiveValue)
        }
        other => panic!("expected semantics-changing, got {other:?}"),
    }
}

#[test]
fn type_change_is_semantics_changing_rule_i() {
    let old = "def compute():\n    return 1\n";
    let new = "def compute():\n    return 'one'\n";
    let outcome = classify_pair(old, new, Arc::new(NaivePredictor));
    match outcome {
        DiffOutcome::SemanticsChanging { rule, .. } => {
            assert_eq!(rule, DifferenceRule::TypeMismatch)
        }
        other => panic!("expected semantics-changing, got {other:?}"),
    }
}

#[test]
fn collection_size_change_is_semantics_changing_rule_iii() {
    let old = "def compute():\n    return [1]\n";
    let new = "def compute():\n    return [1, 2]\n";
    let outcome = classify_pair(old, new, Arc::new(NaivePredictor));
    match outcome {
        DiffOutcome::SemanticsChanging { rule, .. } => {
            assert_eq!(rule, DifferenceRule::CollectionSize)
        }
        other => panic!("expected semantics-changing, got {other:?}"),
    }
}

#[test]
fn unused_local_addition_is_same_behavior() {
    let old = "def compute():\n    return 7\n";
    let new = "def compute():\n    scratch = 99\n    return 7\n";
    let outcome = classify_pair(old, new, Arc::new(NaivePredictor));
    assert!(matches!(outcome, DiffOutcome::SameBehavior), "{outcome:?}");
}

#[test]
fn retry_branch_change_yields_object_versus_none() {
    // The new version pins the retry budget to zero, flipping the branch:
    // the old code returns the (injected) request object, the new returns
    // the null value. The shared session injects the same values for the
    // unchanged reads.
    let old = "\
def _retry(request):
    if retry_times <= max_retry_times:
        return request
    return None
";
    let new = "\
def _retry(request):
    max_retry_times = 0
    if retry_times <= max_retry_times:
        return request
    return None
";
    let stub = StubPredictor::from_pairs(&[
        ("retry_times", ValueKind::Variable, "int_pos"),
        ("max_retry_times", ValueKind::Variable, "int_pos"),
        ("request", ValueKind::Variable, "object"),
    ]);
    let pair = FunctionPair::parse(old, new).unwrap();
    let result = classify(&pair, Arc::new(stub), &DifferConfig::default());
    match &result.outcome {
        DiffOutcome::SemanticsChanging { rule, detail } => {
            assert_eq!(*rule, DifferenceRule::TypeMismatch);
            assert!(detail.contains("Dummy"), "{detail}");
            assert!(detail.contains("None"), "{detail}");
        }
        other => panic!("expected semantics-changing, got {other:?}"),
    }
    assert_eq!(result.old_return.as_deref(), Some("<Dummy>"));
    assert_eq!(result.new_return.as_deref(), Some("None"));
    assert!(result.evidence.is_some(), "witnessing run attached");
}

#[test]
fn shared_session_gives_identical_injections_to_unchanged_reads() {
    // Both versions read the same missing name; the consistency cache must
    // answer the second function from the first function's injection.
    let old = "def probe():\n    return shared_value\n";
    let new = "def probe():\n    extra = 1\n    return shared_value\n";
    let pair = FunctionPair::parse(old, new).unwrap();
    let result = classify(&pair, Arc::new(NaivePredictor), &DifferConfig::default());
    assert!(
        matches!(result.outcome, DiffOutcome::SameBehavior),
        "{:?}",
        result.outcome
    );
    let evidence = result.evidence.unwrap();
    let shared_queries = evidence
        .injections
        .iter()
        .filter(|i| i.name == "shared_value")
        .count();
    assert_eq!(shared_queries, 1, "one query despite two sites");
}

#[test]
fn reflexivity_holds_over_generated_functions() {
    // classify(f, f) never reports semantics-changing. Functions are
    // generated over a grammar of reads, arithmetic, branches and calls of
    // missing helpers; none mutate injected containers.
    let bodies = [
        "    return value_a",
        "    return value_a + value_b",
        "    if flag:\n        return count\n    return None",
        "    x = helper(seed)\n    return x",
        "    if size > limit:\n        return 'big'\n    return 'small'",
        "    total = base\n    for i in range(3):\n        total = total + i\n    return total",
        "    return [first, second]",
        "    return handler.field",
        "    if text:\n        return text.upper()\n    return ''",
        "    return min(low, high)",
    ];
    let mut checked = 0;
    for (i, body) in bodies.iter().enumerate() {
        for variant in 0..5 {
            let f = format!("def generated_{i}_{variant}():\n{body}\n");
            let pair = FunctionPair::parse(&f, &f).unwrap();
            let cfg = DifferConfig {
                seed: variant as u64,
                ..DifferConfig::default()
            };
            let result = classify(&pair, Arc::new(NaivePredictor), &cfg);
            assert!(
                !matches!(result.outcome, DiffOutcome::SemanticsChanging { .. }),
                "reflexivity violated for {f}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 50);
}

#[test]
fn classification_is_deterministic_given_seed() {
    let old = "def compute():\n    return mystery\n";
    let new = "def compute():\n    return mysteryated\n";
    let pair = FunctionPair::parse(old, new).unwrap();
    let cfg = DifferConfig {
        seed: 5,
        granularity: lexec::abstraction::Granularity::Coarse,
        mode: lexec::abstraction::ConcretizationMode::Randomized,
        ..DifferConfig::default()
    };
    let a = classify(&pair, Arc::new(NaivePredictor), &cfg);
    let b = classify(&pair, Arc::new(NaivePredictor), &cfg);
    assert_eq!(a.old_return, b.old_return);
    assert_eq!(a.new_return, b.new_return);
    assert_eq!(
        format!("{:?}", a.outcome),
        format!("{:?}", b.outcome)
    );
}
