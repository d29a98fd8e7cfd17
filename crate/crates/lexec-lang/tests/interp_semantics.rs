//! End-to-end execution semantics of the snippet language.

use std::cell::RefCell;
use std::rc::Rc;
use std::time::{Duration, Instant};

use lexec_lang::interp::LineTracker;
use lexec_lang::{parse_program, ExcKind, HostError, Interp};

fn run(src: &str) -> (String, Result<(), HostError>) {
    let program = parse_program(src).expect("parse");
    let mut interp = Interp::new();
    let globals = interp.new_globals();
    let result = interp.run_program(&program, &globals);
    (interp.output_string(), result)
}

fn run_ok(src: &str) -> String {
    let (out, result) = run(src);
    if let Err(e) = result {
        panic!("execution failed: {} at line {:?}: {}", e.kind.name(), e.line, e.message);
    }
    out
}

fn run_err(src: &str) -> HostError {
    let (_, result) = run(src);
    result.expect_err("expected an error")
}

#[test]
fn arithmetic_and_printing() {
    assert_eq!(run_ok("print(1 + 2 * 3)\n"), "7\n");
    assert_eq!(run_ok("print(7 // 2, 7 % 2, -7 // 2, -7 % 2)\n"), "3 1 -4 1\n");
    assert_eq!(run_ok("print(1 / 2)\n"), "0.5\n");
    assert_eq!(run_ok("print(2 ** 10)\n"), "1024\n");
    assert_eq!(run_ok("print('ab' + 'cd', 'x' * 3)\n"), "abcd xxx\n");
    assert_eq!(run_ok("print(10.0)\n"), "10.0\n");
}

#[test]
fn truthiness_and_boolean_operators() {
    assert_eq!(run_ok("print(0 or 'x')\n"), "x\n");
    assert_eq!(run_ok("print([] and 1)\n"), "[]\n");
    assert_eq!(run_ok("print(not '')\n"), "True\n");
    assert_eq!(run_ok("print(1 < 2 < 3, 1 < 2 > 5)\n"), "True False\n");
}

#[test]
fn control_flow() {
    let src = "\
total = 0
for i in range(5):
    if i % 2 == 0:
        total += i
    else:
        continue
print(total)
";
    assert_eq!(run_ok(src), "6\n");

    let src2 = "\
n = 0
while True:
    n += 1
    if n == 3:
        break
print(n)
";
    assert_eq!(run_ok(src2), "3\n");
}

#[test]
fn functions_and_closures() {
    let src = "\
def make_adder(k):
    def add(x):
        return x + k
    return add

inc = make_adder(1)
print(inc(41))
";
    assert_eq!(run_ok(src), "42\n");
}

#[test]
fn lambda_and_defaults() {
    assert_eq!(run_ok("f = lambda x, y=10: x + y\nprint(f(1), f(1, 2))\n"), "11 3\n");
}

#[test]
fn missing_arguments_leave_parameters_unbound() {
    // Calling with too few arguments succeeds; reading the unbound parameter
    // raises the undefined-name error.
    let src = "\
def f(a, b):
    return a
print(f(5))
";
    assert_eq!(run_ok(src), "5\n");

    let err = run_err("def f(a, b):\n    return b\nprint(f(5))\n");
    assert_eq!(err.kind, ExcKind::NameError);
    assert!(err.message.contains("'b'"));
}

#[test]
fn exceptions_and_handlers() {
    let src = "\
try:
    x = 1 // 0
except ZeroDivisionError as e:
    print('caught', e)
print('after')
";
    assert_eq!(run_ok(src), "caught integer division or modulo by zero\nafter\n");

    let err = run_err("raise ValueError('boom')\n");
    assert_eq!(err.kind, ExcKind::ValueError);
    assert_eq!(err.message, "boom");
    assert_eq!(err.line, Some(1));
}

#[test]
fn finally_always_runs() {
    let src = "\
try:
    raise KeyError('k')
except ValueError:
    print('wrong')
finally:
    print('cleanup')
";
    let (out, result) = run(src);
    assert_eq!(out, "cleanup\n");
    assert_eq!(result.unwrap_err().kind, ExcKind::KeyError);
}

#[test]
fn bare_raise_reraises() {
    let src = "\
try:
    try:
        raise ValueError('inner')
    except ValueError:
        raise
except ValueError as e:
    print('outer', e)
";
    assert_eq!(run_ok(src), "outer inner\n");
}

#[test]
fn tuple_unpacking_and_dict_iteration() {
    let src = "\
d = {'a': 1, 'b': 2}
for k, v in d.items():
    print(k, v)
";
    assert_eq!(run_ok(src), "a 1\nb 2\n");
}

#[test]
fn containers_and_methods() {
    let src = "\
xs = [3, 1, 2]
xs.append(0)
xs.sort()
print(xs, len(xs), 2 in xs)
s = {1, 2}
s.add(1)
print(len(s))
t = (1, 2, 3)
print(t[1:], t[-1])
print(sorted(['b', 'a']))
print('a-b-c'.split('-'))
print('/'.join(['x', 'y']))
print({'k': 9}.get('missing', -1))
";
    assert_eq!(
        run_ok(src),
        "[0, 1, 2, 3] 4 True\n2\n(2, 3) 3\n['a', 'b']\n['a', 'b', 'c']\nx/y\n-1\n"
    );
}

#[test]
fn string_formatting_operator() {
    assert_eq!(run_ok("print('%s=%d' % ('a', 7))\n"), "a=7\n");
    assert_eq!(run_ok("print('100%%' % ())\n"), "100%\n");
    assert_eq!(run_err("print('%d %d' % 1)\n").kind, ExcKind::TypeError);
}

#[test]
fn subscripts_and_slices() {
    let src = "\
xs = [10, 20, 30, 40]
print(xs[0], xs[-1], xs[1:3], xs[:2], xs[2:])
d = {}
d['k'] = 5
d['k'] += 1
print(d['k'])
s = 'hello'
print(s[1], s[1:4])
";
    assert_eq!(run_ok(src), "10 40 [20, 30] [10, 20] [30, 40]\n6\ne ell\n");
}

#[test]
fn key_and_index_errors() {
    assert_eq!(run_err("d = {}\nx = d['nope']\n").kind, ExcKind::KeyError);
    assert_eq!(run_err("xs = []\nx = xs[0]\n").kind, ExcKind::IndexError);
    assert_eq!(run_err("x = undefined_name\n").kind, ExcKind::NameError);
    assert_eq!(run_err("x = (1).foo\n").kind, ExcKind::AttributeError);
    assert_eq!(run_err("x = 3()\n").kind, ExcKind::TypeError);
    assert_eq!(run_err("import numpy\n").kind, ExcKind::ImportError);
}

#[test]
fn assert_statement() {
    assert_eq!(run_ok("assert 1 == 1\nprint('ok')\n"), "ok\n");
    let err = run_err("assert 1 == 2, 'mismatch'\n");
    assert_eq!(err.kind, ExcKind::AssertionError);
    assert_eq!(err.message, "mismatch");
}

#[test]
fn recursion_limit() {
    let err = run_err("def f():\n    return f()\nf()\n");
    assert_eq!(err.kind, ExcKind::RecursionError);
}

#[test]
fn deadline_interrupts_infinite_loop() {
    let program = parse_program("while True:\n    pass\n").unwrap();
    let mut interp = Interp::new();
    interp.deadline = Some(Instant::now() + Duration::from_millis(50));
    let globals = interp.new_globals();
    let err = interp.run_program(&program, &globals).unwrap_err();
    assert_eq!(err.kind, ExcKind::Timeout);
}

#[test]
fn timeout_is_not_catchable() {
    let program = parse_program("try:\n    while True:\n        pass\nexcept:\n    print('no')\n").unwrap();
    let mut interp = Interp::new();
    interp.deadline = Some(Instant::now() + Duration::from_millis(50));
    let globals = interp.new_globals();
    let err = interp.run_program(&program, &globals).unwrap_err();
    assert_eq!(err.kind, ExcKind::Timeout);
}

#[test]
fn line_tracker_reports_coverage() {
    let src = "\
x = 1
try:
    y = 1 // 0
except ZeroDivisionError:
    z = 2
w = 3
";
    let program = parse_program(src).unwrap();
    let mut interp = Interp::new();
    let tracker = Rc::new(RefCell::new(LineTracker::default()));
    interp.tracker = Some(tracker.clone());
    let globals = interp.new_globals();
    interp.run_program(&program, &globals).unwrap();
    let t = tracker.borrow();
    let covered = t.covered_lines();
    // Line 3 raised (caught), so it executed but is not covered.
    assert!(t.executed_lines().contains(&3));
    assert!(!covered.contains(&3));
    for line in [1u32, 2, 4, 5, 6] {
        assert!(covered.contains(&line), "line {line} should be covered");
    }
}

#[test]
fn line_tracker_multiline_statement() {
    let src = "x = (1 +\n     2)\nprint(x)\n";
    let program = parse_program(src).unwrap();
    let mut interp = Interp::new();
    let tracker = Rc::new(RefCell::new(LineTracker::default()));
    interp.tracker = Some(tracker.clone());
    let globals = interp.new_globals();
    interp.run_program(&program, &globals).unwrap();
    let covered = tracker.borrow().covered_lines();
    assert!(covered.contains(&1) && covered.contains(&2) && covered.contains(&3));
}

#[test]
fn uncaught_error_marks_origin_line() {
    let src = "a = 1\nb = a + undefined\nc = 3\n";
    let program = parse_program(src).unwrap();
    let mut interp = Interp::new();
    let tracker = Rc::new(RefCell::new(LineTracker::default()));
    interp.tracker = Some(tracker.clone());
    let globals = interp.new_globals();
    let err = interp.run_program(&program, &globals).unwrap_err();
    assert_eq!(err.line, Some(2));
    let t = tracker.borrow();
    assert!(t.exception_origins().contains(&2));
    let covered = t.covered_lines();
    assert!(covered.contains(&1));
    assert!(!covered.contains(&2));
    assert!(!covered.contains(&3));
}

#[test]
fn with_statement_requires_resource() {
    let err = run_err("with 5 as h:\n    pass\n");
    assert_eq!(err.kind, ExcKind::TypeError);
}

#[test]
fn chained_assignment_and_multiline_calls() {
    let src = "\
a = b = [1]
b.append(2)
print(a)
total = sum([1,
             2,
             3])
print(total)
";
    assert_eq!(run_ok(src), "[1, 2]\n6\n");
}

#[test]
fn map_and_filter_are_eager_lists() {
    let src = "\
xs = map(lambda v: v * 2, [1, 2, 3])
print(xs)
ys = filter(lambda v: v > 2, [1, 2, 3, 4])
print(ys)
";
    assert_eq!(run_ok(src), "[2, 4, 6]\n[3, 4]\n");
}

#[test]
fn str_of_values_matches_expected_forms() {
    let src = "\
print(str(None), str(True), str(1.5))
print(repr('a'), str('a'))
print(type(3), type('x'), type([]))
";
    assert_eq!(run_ok(src), "None True 1.5\n'a' a\nint str list\n");
}
