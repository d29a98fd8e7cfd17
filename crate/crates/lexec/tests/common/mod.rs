//! Shared test fixtures: a seeded generator of self-contained snippets and
//! the reference incomplete corpus used by coverage-ordering checks.

// Each integration-test binary compiles this module separately and uses a
// subset of it.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generates a deterministic, self-contained snippet: every name is defined
/// before use, all operations are type-correct, and the snippet prints
/// observable output. Exercises assignments, arithmetic, strings, lists,
/// dicts, loops, conditionals, functions, methods and caught exceptions.
pub struct SnippetGen {
    rng: ChaCha8Rng,
    ints: Vec<String>,
    strs: Vec<String>,
    lists: Vec<String>,
    counter: usize,
}

impl SnippetGen {
    pub fn new(seed: u64) -> SnippetGen {
        SnippetGen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            ints: Vec::new(),
            strs: Vec::new(),
            lists: Vec::new(),
            counter: 0,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        let name = format!("{prefix}{}", self.counter);
        self.counter += 1;
        name
    }

    fn int_expr(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("{}", self.rng.gen_range(-5..20)),
            1 if !self.ints.is_empty() => {
                let v = &self.ints[self.rng.gen_range(0..self.ints.len())];
                format!("{v} + {}", self.rng.gen_range(1..5))
            }
            2 if !self.lists.is_empty() => {
                let v = &self.lists[self.rng.gen_range(0..self.lists.len())];
                format!("len({v})")
            }
            3 if !self.strs.is_empty() => {
                let v = &self.strs[self.rng.gen_range(0..self.strs.len())];
                format!("len({v})")
            }
            _ => format!("{}", self.rng.gen_range(0..10)),
        }
    }

    fn pick(&mut self, pool: &[String]) -> Option<String> {
        if pool.is_empty() {
            None
        } else {
            Some(pool[self.rng.gen_range(0..pool.len())].clone())
        }
    }

    pub fn generate(mut self) -> String {
        let mut out = String::new();
        let n = self.rng.gen_range(4..10);
        for _ in 0..n {
            let stmt = self.statement();
            out.push_str(&stmt);
        }
        // Always end with observable output.
        if let Some(v) = self.pick(&self.ints.clone()) {
            out.push_str(&format!("print('final', {v})\n"));
        } else {
            out.push_str("print('final')\n");
        }
        out
    }

    fn statement(&mut self) -> String {
        let ints = self.ints.clone();
        let strs = self.strs.clone();
        let lists = self.lists.clone();
        match self.rng.gen_range(0..12) {
            0 => {
                let name = self.fresh("n");
                let expr = self.int_expr();
                self.ints.push(name.clone());
                format!("{name} = {expr}\n")
            }
            1 => {
                let name = self.fresh("s");
                let lit = ["alpha", "beta", "gamma", "x y", "q#r"]
                    [self.rng.gen_range(0..5)];
                self.strs.push(name.clone());
                format!("{name} = '{lit}'\n")
            }
            2 => {
                let name = self.fresh("xs");
                let a = self.int_expr();
                let b = self.int_expr();
                self.lists.push(name.clone());
                format!("{name} = [{a}, {b}]\n")
            }
            3 => match self.pick(&ints) {
                Some(v) => format!("print({v} * 2, {v} - 1)\n"),
                None => "print('nop')\n".to_string(),
            },
            4 => match self.pick(&ints) {
                Some(v) => {
                    let d = self.rng.gen_range(1..4);
                    format!("{v} += {d}\n")
                }
                None => "pass\n".to_string(),
            },
            5 => match self.pick(&lists) {
                Some(v) => {
                    let e = self.int_expr();
                    format!("{v}.append({e})\nprint(len({v}))\n")
                }
                None => "print([])\n".to_string(),
            },
            6 => {
                let loop_var = self.fresh("i");
                let bound = self.rng.gen_range(2..5);
                let body = match self.pick(&ints) {
                    Some(v) => format!("    {v} += {loop_var}\n"),
                    None => format!("    print({loop_var})\n"),
                };
                format!("for {loop_var} in range({bound}):\n{body}")
            }
            7 => match self.pick(&ints) {
                Some(v) => format!(
                    "if {v} % 2 == 0:\n    print('even')\nelse:\n    print('odd')\n"
                ),
                None => "if True:\n    print('taken')\n".to_string(),
            },
            8 => {
                let f = self.fresh("f");
                let name = self.fresh("n");
                let arg = self.int_expr();
                self.ints.push(name.clone());
                format!(
                    "def {f}(a, b=2):\n    return a * b\n{name} = {f}({arg})\n"
                )
            }
            9 => match self.pick(&strs) {
                Some(v) => format!("print({v}.upper(), len({v}))\n"),
                None => "print('')\n".to_string(),
            },
            10 => match self.pick(&ints) {
                Some(v) => format!(
                    "try:\n    q = {v} // ({v} - {v})\nexcept ZeroDivisionError:\n    print('guarded')\n"
                ),
                None => "try:\n    q = 1 // 0\nexcept ZeroDivisionError:\n    print('guarded')\n".to_string(),
            },
            _ => {
                let d = self.fresh("d");
                let k = ["'k'", "'item'", "0"][self.rng.gen_range(0..3)];
                let val = self.int_expr();
                format!("{d} = {{{k}: {val}}}\nprint({d}[{k}])\n")
            }
        }
    }
}

pub fn generate_snippet(seed: u64) -> String {
    SnippetGen::new(seed).generate()
}

pub fn generated_corpus(count: usize, base_seed: u64) -> Vec<(String, String)> {
    (0..count)
        .map(|i| {
            (
                format!("gen_{i:03}.py"),
                generate_snippet(base_seed + i as u64),
            )
        })
        .collect()
}

/// The incomplete corpus for coverage-ordering checks: every snippet
/// crashes on line 1 as-is; object injection unblocks the first third
/// fully; the rest need name-specific classes (a positive integer for
/// `batch_count`, a non-empty list for `user_names`).
pub fn incomplete_corpus() -> Vec<(String, String)> {
    let mut snippets = Vec::new();
    for i in 0..10 {
        snippets.push((
            format!("any_{i}.py"),
            format!("handle_{i} = audit_handle\nprint('handle ready')\nflag_{i} = 1\n"),
        ));
    }
    for i in 0..10 {
        snippets.push((
            format!("int_{i}.py"),
            format!("n_{i} = batch_count\ntotal_{i} = n_{i} + 1\nprint(total_{i})\n"),
        ));
    }
    for i in 0..10 {
        snippets.push((
            format!("list_{i}.py"),
            format!("names_{i} = user_names\nfor u in names_{i}:\n    print(u)\n"),
        ));
    }
    snippets
}
