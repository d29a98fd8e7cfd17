//! Coverage measurement and batch-driver behavior.

use std::sync::Arc;
use std::time::Duration;

use lexec::abstraction::{ConcretizationMode, FineClass, Granularity};
use lexec::harness::{
    compare_summaries, run_batch, run_snippet, BatchSummary, RunConfig, Snippet,
    FLAG_SYNTAX_ERROR, FLAG_TIMED_OUT, FLAG_UNCALLED_FUNCTION_LINES,
};
use lexec::predict::baselines::{FrequencyPredictor, FrequencyTable, NaivePredictor, StubPredictor};
use lexec::ValueKind;

fn naive_cfg(seed: u64) -> RunConfig {
    RunConfig::injecting(
        "naive:fine:det",
        Arc::new(NaivePredictor),
        Granularity::Fine,
        ConcretizationMode::Deterministic,
        seed,
    )
}

#[test]
fn as_is_crash_on_line_one_covers_nothing() {
    let src = "x = missing\ny = 2\nz = 3\n";
    let run = run_snippet(src, "s.py", &RunConfig::as_is("asis"));
    assert_eq!(run.report.countable_lines.len(), 3);
    assert_eq!(run.report.coverage(), 0.0);
    let term = run.report.terminal_exception.as_ref().unwrap();
    assert_eq!(term.exc_type, "NameError");
    assert_eq!(term.line, Some(1));
    assert!(run.report.executed_lines.contains(&1));
}

#[test]
fn caught_exception_line_is_executed_but_not_covered() {
    let src = "\
try:
    x = 1 // 0
except ZeroDivisionError:
    y = 2
z = 3
";
    let run = run_snippet(src, "s.py", &RunConfig::as_is("asis"));
    let r = &run.report;
    assert!(r.terminal_exception.is_none());
    assert!(r.executed_lines.contains(&2));
    assert!(!r.covered_lines.contains(&2));
    for line in [1u32, 3, 4, 5] {
        assert!(r.covered_lines.contains(&line), "line {line}");
    }
    assert!((r.coverage() - 0.8).abs() < 1e-12);
}

#[test]
fn blank_and_comment_lines_are_not_countable() {
    let src = "\
# a comment

x = 1

# another
y = 2
";
    let run = run_snippet(src, "s.py", &RunConfig::as_is("asis"));
    assert_eq!(
        run.report.countable_lines.iter().copied().collect::<Vec<_>>(),
        vec![3, 6]
    );
    assert_eq!(run.report.coverage(), 1.0);
}

#[test]
fn string_with_hash_is_countable() {
    let src = "s = 'text # not a comment'\nprint(s)\n";
    let run = run_snippet(src, "s.py", &RunConfig::as_is("asis"));
    assert_eq!(run.report.countable_lines.len(), 2);
}

#[test]
fn syntax_errors_are_flagged_with_zero_coverage() {
    let src = "def broken(:\n";
    let run = run_snippet(src, "s.py", &naive_cfg(0));
    assert!(run.report.flags.contains(&FLAG_SYNTAX_ERROR.to_string()));
    assert_eq!(run.report.coverage(), 0.0);
}

#[test]
fn timeouts_are_flagged_and_keep_completed_lines() {
    let src = "x = 1\nwhile True:\n    pass\n";
    let cfg = naive_cfg(0).with_timeout(Duration::from_millis(100));
    let run = run_snippet(src, "s.py", &cfg);
    assert!(run.report.flags.contains(&FLAG_TIMED_OUT.to_string()));
    assert!(run.report.covered_lines.contains(&1));
    assert!(run.report.terminal_exception.is_none());
}

#[test]
fn uncalled_function_bodies_are_countable_uncovered_and_flagged() {
    let src = "\
def helper():
    return 1

x = 2
";
    let run = run_snippet(src, "s.py", &RunConfig::as_is("asis"));
    let r = &run.report;
    assert!(r.countable_lines.contains(&2), "body line countable");
    assert!(!r.covered_lines.contains(&2), "body line uncovered");
    assert!(r.flags.contains(&FLAG_UNCALLED_FUNCTION_LINES.to_string()));
    assert!(r.coverage() < 1.0);
}

#[test]
fn injection_can_only_extend_coverage() {
    let sources = [
        "x = missing\nprint(x)\n",
        "a = 1\nb = phantom + a\nprint(b)\n",
        "print('plain')\n",
        "def f():\n    return later\nprint(f())\n",
        "items = data\nfor i in items:\n    print(i)\n",
    ];
    for (i, src) in sources.iter().enumerate() {
        let asis = run_snippet(src, &format!("s{i}.py"), &RunConfig::as_is("asis"));
        let naive = run_snippet(src, &format!("s{i}.py"), &naive_cfg(0));
        assert!(
            naive.report.coverage() >= asis.report.coverage(),
            "injection reduced coverage on {src:?}"
        );
        assert!(
            asis.report
                .covered_lines
                .is_subset(&naive.report.covered_lines),
            "covered set shrank on {src:?}"
        );
    }
}

#[test]
fn identical_inputs_give_identical_reports_modulo_duration() {
    let src = "v = first\nw = second\nprint(type(v), type(w))\n";
    let cfg = RunConfig::injecting(
        "rand",
        Arc::new(NaivePredictor),
        Granularity::Coarse,
        ConcretizationMode::Randomized,
        1234,
    );
    let a = run_snippet(src, "s.py", &cfg);
    let b = run_snippet(src, "s.py", &cfg);
    assert_eq!(a.report.deterministic_view(), b.report.deterministic_view());
    assert_eq!(a.output, b.output);
}

#[test]
fn self_contained_corpus_reaches_full_coverage_under_every_config() {
    let snippets = vec![
        Snippet {
            id: "a.py".to_string(),
            source: "x = 1\nprint(x + 1)\n".to_string(),
        },
        Snippet {
            id: "b.py".to_string(),
            source: "for i in range(3):\n    print(i)\n".to_string(),
        },
    ];
    let configs = vec![
        RunConfig::as_is("asis"),
        naive_cfg(0),
        RunConfig::injecting(
            "freq",
            Arc::new(FrequencyPredictor::new(FrequencyTable::default())),
            Granularity::Coarse,
            ConcretizationMode::Deterministic,
            0,
        ),
    ];
    let summaries = run_batch(&snippets, &configs);
    for s in &summaries {
        assert_eq!(s.mean_coverage, 1.0, "config {}", s.config);
        assert_eq!(s.fully_executed_fraction, 1.0);
    }
}

#[test]
fn fully_executed_fraction_is_consistent_with_reports() {
    let snippets = vec![
        Snippet {
            id: "good.py".to_string(),
            source: "print(1)\n".to_string(),
        },
        Snippet {
            id: "bad.py".to_string(),
            source: "raise ValueError('x')\nprint(2)\n".to_string(),
        },
    ];
    let summaries = run_batch(&snippets, &[RunConfig::as_is("asis")]);
    let s = &summaries[0];
    let recount = s.reports.iter().filter(|r| r.fully_executed()).count() as f64
        / s.reports.len() as f64;
    assert_eq!(s.fully_executed_fraction, recount);
    assert_eq!(s.fully_executed_fraction, 0.5);
}

#[test]
fn comparison_of_identical_summaries_gives_p_one() {
    let snippets = vec![Snippet {
        id: "a.py".to_string(),
        source: "print(1)\n".to_string(),
    }];
    let summaries = run_batch(&snippets, &[RunConfig::as_is("x"), RunConfig::as_is("y")]);
    let cmp = compare_summaries(&summaries[0], &summaries[1]).unwrap();
    assert_eq!(cmp.wilcoxon.p_value, 1.0);
    assert!(cmp.deltas.iter().all(|(_, d)| *d == 0.0));
}

#[test]
fn uniform_half_point_improvements_are_significant() {
    // Twenty snippets where the injecting configuration covers the second
    // half of each two-line snippet that crashes as-is on line 2 of 4.
    let mut snippets = Vec::new();
    for i in 0..20 {
        snippets.push(Snippet {
            id: format!("s{i}.py"),
            source: "a = 1\nb = lost\nc = 3\nd = 4\n".to_string(),
        });
    }
    let summaries = run_batch(&snippets, &[RunConfig::as_is("asis"), naive_cfg(0)]);
    let cmp = compare_summaries(&summaries[0], &summaries[1]).unwrap();
    for (_, d) in &cmp.deltas {
        assert!((d - 0.75).abs() < 1e-12, "as-is covers 1/4, naive 4/4");
    }
    assert!(cmp.wilcoxon.p_value < 0.05);
    assert!((cmp.wilcoxon.p_value - 2.0 / (1u64 << 20) as f64).abs() < 1e-12);
}

#[test]
fn mismatched_snippet_sets_are_a_contract_error() {
    let a = BatchSummary::from_reports(
        "a",
        vec![run_snippet("print(1)\n", "one.py", &RunConfig::as_is("a")).report],
    );
    let b = BatchSummary::from_reports(
        "b",
        vec![run_snippet("print(1)\n", "two.py", &RunConfig::as_is("b")).report],
    );
    assert!(compare_summaries(&a, &b).is_err());
}

#[test]
fn one_differing_snippet_yields_one_nonzero_delta() {
    let snippets = vec![
        Snippet {
            id: "same.py".to_string(),
            source: "print(1)\n".to_string(),
        },
        Snippet {
            id: "diff.py".to_string(),
            source: "x = gone\nprint(x)\n".to_string(),
        },
    ];
    let summaries = run_batch(&snippets, &[RunConfig::as_is("asis"), naive_cfg(0)]);
    let cmp = compare_summaries(&summaries[0], &summaries[1]).unwrap();
    let nonzero: Vec<_> = cmp.deltas.iter().filter(|(_, d)| *d != 0.0).collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0].0, "diff.py");
}

#[test]
fn frequency_beats_naive_on_type_demanding_snippet() {
    let src = "n = batch_count\ntotal = n + 1\nprint(total)\n";
    let naive = run_snippet(src, "s.py", &naive_cfg(0));
    assert!(naive.report.coverage() < 1.0, "object + 1 must fail");

    let table = FrequencyTable::fit(vec![
        ("batch_count".to_string(), FineClass::IntPos),
        ("batch_count".to_string(), FineClass::IntPos),
    ]);
    let freq_cfg = RunConfig::injecting(
        "freq",
        Arc::new(FrequencyPredictor::new(table)),
        Granularity::Fine,
        ConcretizationMode::Deterministic,
        0,
    );
    let freq = run_snippet(src, "s.py", &freq_cfg);
    assert_eq!(freq.report.coverage(), 1.0);
    assert_eq!(freq.output, "2\n");
}

#[test]
fn stub_predictor_drives_reference_snippet_to_full_coverage() {
    let src = "\
if (not has_min_size(all_data)): raise RuntimeError(\"too few samples\")
train_data = all_data[0:100]
labels = []
for item in train_data: labels.append(item)
status = \"ok\"
logger.info(config_str + status)
";
    let stub = StubPredictor::from_pairs(&[
        ("all_data", ValueKind::Variable, "list_nonempty"),
        ("has_min_size", ValueKind::Variable, "callable"),
        ("has_min_size", ValueKind::ReturnValue, "true"),
        ("config_str", ValueKind::Variable, "str_nonempty"),
        ("logger", ValueKind::Variable, "object"),
        ("info", ValueKind::Attribute, "callable"),
        ("info", ValueKind::ReturnValue, "none"),
    ]);
    let cfg = RunConfig::injecting(
        "stub",
        Arc::new(stub),
        Granularity::Fine,
        ConcretizationMode::Deterministic,
        0,
    );
    let run = run_snippet(src, "fig.py", &cfg);
    assert!(run.report.terminal_exception.is_none());
    assert_eq!(run.report.coverage(), 1.0);
}
