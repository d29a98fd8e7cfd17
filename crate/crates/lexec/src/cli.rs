//! Command-line interface.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::abstraction::{ConcretizationMode, Granularity};
use crate::differ::{classify, pair_changed_functions, DiffOutcome, DifferConfig, FunctionPair};
use crate::harness::{
    compare_summaries, load_corpus, run_snippet, write_batch_csv, write_batch_json, BatchSummary,
    RunConfig, RunPredictor, Snippet,
};
use crate::instrument::{instrument_tree, SIDECAR_FILE_NAME};
use crate::predict::baselines::{
    FrequencyPredictor, FrequencyTable, NaivePredictor, RandomPredictor, StubPredictor,
};
use crate::predict::{remote::remote_predictor, server::serve, Predictor};
use crate::trace::eval::{evaluate_topk, EmptyContexts, SidecarContexts};
use crate::trace::{
    deduplicate, frequency_observations, read_trace, record_run, split, write_trace,
};

#[derive(Parser)]
#[command(
    name = "lexec",
    about = "Learning-guided execution: instrument snippets, intercept missing-value failures, inject predictor-chosen values",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instrument files or directories, writing instrumented sources and a
    /// metadata sidecar.
    Instrument(InstrumentArgs),
    /// Execute an instrumented file in record mode and write the value-use
    /// trace.
    Trace(TraceArgs),
    /// Evaluate a predictor's top-k accuracy against a held-out split of a
    /// trace.
    EvalPredictor(EvalArgs),
    /// Lexecute a single snippet and report line coverage.
    Run(RunArgs),
    /// Lexecute a corpus under one or more configurations.
    Batch(BatchArgs),
    /// Classify a function pair as exceptional, same-behavior, or
    /// semantics-changing.
    DiffCommit(DiffArgs),
    /// Serve a predictor over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PredictorKind {
    Asis,
    Naive,
    Random,
    Frequency,
    Rest,
    Stub,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GranularityArg {
    Fine,
    Coarse,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Granularity {
        match g {
            GranularityArg::Fine => Granularity::Fine,
            GranularityArg::Coarse => Granularity::Coarse,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Det,
    Rand,
}

impl From<ModeArg> for ConcretizationMode {
    fn from(m: ModeArg) -> ConcretizationMode {
        match m {
            ModeArg::Det => ConcretizationMode::Deterministic,
            ModeArg::Rand => ConcretizationMode::Randomized,
        }
    }
}

#[derive(Args)]
struct PredictorArgs {
    /// Trace file (JSONL) the frequency predictor fits its table on.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Base URL of a served predictor (for --predictor rest).
    #[arg(long)]
    url: Option<String>,
    /// Stub script JSON (for --predictor stub).
    #[arg(long)]
    script: Option<PathBuf>,
}

fn build_predictor(
    kind: PredictorKind,
    args: &PredictorArgs,
    seed: u64,
    timeout: Duration,
) -> Result<Arc<dyn Predictor>, String> {
    match kind {
        PredictorKind::Asis => Err("as-is runs use no predictor".to_string()),
        PredictorKind::Naive => Ok(Arc::new(NaivePredictor)),
        PredictorKind::Random => Ok(Arc::new(RandomPredictor::seeded(seed))),
        PredictorKind::Frequency => {
            let path = args
                .table
                .as_ref()
                .ok_or("--predictor frequency requires --table TRACE.jsonl")?;
            let events = read_trace(path).map_err(|e| e.to_string())?;
            let ds = deduplicate(events);
            Ok(Arc::new(FrequencyPredictor::new(FrequencyTable::fit(
                frequency_observations(&ds.events),
            ))))
        }
        PredictorKind::Rest => {
            let url = args
                .url
                .as_ref()
                .ok_or("--predictor rest requires --url BASE_URL")?;
            let remote = remote_predictor(url.clone(), timeout).map_err(|e| e.to_string())?;
            Ok(Arc::new(remote))
        }
        PredictorKind::Stub => {
            let path = args
                .script
                .as_ref()
                .ok_or("--predictor stub requires --script FILE.json")?;
            Ok(Arc::new(
                StubPredictor::load_script(path).map_err(|e| e.to_string())?,
            ))
        }
    }
}

#[derive(Args)]
struct InstrumentArgs {
    /// Files or directories to instrument.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Output directory (instrumented files keep their relative paths).
    #[arg(long)]
    out: PathBuf,
    /// Context-window token budget downstream query builders should use.
    #[arg(long, default_value_t = 512)]
    window: usize,
}

#[derive(Args)]
struct TraceArgs {
    /// Instrumented entry file.
    entry: PathBuf,
    /// Sidecar produced alongside the instrumented file.
    #[arg(long)]
    sidecar: PathBuf,
    /// Output trace file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Per-run wall-clock budget in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Trace file to split and evaluate on.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, value_enum)]
    predictor: PredictorKind,
    #[command(flatten)]
    predictor_args: PredictorArgs,
    /// Training fraction of the deduplicated trace.
    #[arg(long, default_value_t = 0.95)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated k values.
    #[arg(long, default_value = "1,3,5")]
    topk: String,
    #[arg(long, value_enum, default_value_t = GranularityArg::Fine)]
    granularity: GranularityArg,
    /// Original-source root for context reconstruction.
    #[arg(long)]
    sources: Option<PathBuf>,
    /// Sidecar for context reconstruction (defaults to the one next to
    /// --sources).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    window: usize,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    predictor: PredictorKind,
    #[command(flatten)]
    predictor_args: PredictorArgs,
    #[arg(long, value_enum, default_value_t = GranularityArg::Fine)]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Det)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Write the run report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Echo the snippet's captured standard output.
    #[arg(long)]
    show_output: bool,
    /// Print nothing but errors (used by batch worker processes).
    #[arg(long)]
    quiet: bool,
    #[arg(long, default_value_t = 512)]
    window: usize,
}

#[derive(Args)]
struct BatchArgs {
    corpus: PathBuf,
    /// Configuration specs: `asis` or `PREDICTOR:GRANULARITY:MODE`
    /// (e.g. `naive:fine:det`, `frequency:coarse:rand`). Repeatable.
    #[arg(long = "config", required = true)]
    configs: Vec<String>,
    #[command(flatten)]
    predictor_args: PredictorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Run snippets in this process instead of isolated workers.
    #[arg(long)]
    no_isolate: bool,
    /// Compare the first two configs with a paired Wilcoxon test.
    #[arg(long)]
    compare: bool,
}

#[derive(Args)]
struct DiffArgs {
    /// Old version of the function (single def).
    #[arg(long)]
    old: Option<PathBuf>,
    /// New version of the function (single def).
    #[arg(long)]
    new: Option<PathBuf>,
    /// Manifest of pairs: JSON list of {"old": path, "new": path}.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PredictorKind::Naive)]
    predictor: PredictorKind,
    #[command(flatten)]
    predictor_args: PredictorArgs,
    #[arg(long, value_enum, default_value_t = GranularityArg::Fine)]
    granularity: GranularityArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Det)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum)]
    predictor: PredictorKind,
    #[command(flatten)]
    predictor_args: PredictorArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8177)]
    port: u16,
}

pub fn main() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Instrument(args) => cmd_instrument(args),
        Command::Trace(args) => cmd_trace(args),
        Command::EvalPredictor(args) => cmd_eval(args),
        Command::Run(args) => cmd_run(args),
        Command::Batch(args) => cmd_batch(args),
        Command::DiffCommit(args) => cmd_diff(args),
        Command::Serve(args) => cmd_serve(args),
    }
}

fn cmd_instrument(args: InstrumentArgs) -> Result<(), String> {
    if args.window == 0 {
        return Err("--window must be positive".to_string());
    }
    let mut total_units = 0;
    let mut total_skipped = 0;
    let mut combined = crate::instrument::Sidecar::default();
    for path in &args.paths {
        let report = instrument_tree(path, &args.out).map_err(|e| e.to_string())?;
        for skip in &report.skipped {
            eprintln!("skipped {} (line {}): {}", skip.file, skip.line, skip.message);
        }
        total_units += report.units.len();
        total_skipped += report.skipped.len();
        for unit in &report.units {
            combined.insert_unit(unit);
        }
    }
    // instrument_tree writes one sidecar per input path; the combined one
    // covers them all.
    combined
        .save(&args.out.join(SIDECAR_FILE_NAME))
        .map_err(|e| e.to_string())?;
    println!(
        "instrumented {total_units} file(s), skipped {total_skipped}; sidecar: {}",
        args.out.join(SIDECAR_FILE_NAME).display()
    );
    Ok(())
}

fn load_unit_from_instrumented(
    entry: &Path,
    sidecar_path: &Path,
) -> Result<crate::instrument::InstrumentedUnit, String> {
    let instrumented = std::fs::read_to_string(entry)
        .map_err(|e| format!("cannot read {}: {e}", entry.display()))?;
    let sidecar = crate::instrument::Sidecar::load(sidecar_path).map_err(|e| e.to_string())?;
    let entry_name = entry
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let (file, meta) = sidecar
        .files
        .iter()
        .find(|(rel, _)| **rel == entry_name || entry.ends_with(rel.as_str()))
        .ok_or_else(|| format!("sidecar has no entry matching {}", entry.display()))?;
    // Recover the original source by re-reading it next to the sidecar when
    // present; the original text is only needed for context building, so an
    // empty fallback still records correct traces.
    let original = std::fs::read_to_string(sidecar_path.parent().unwrap_or(Path::new(".")).join(file))
        .unwrap_or_default();
    Ok(crate::instrument::InstrumentedUnit {
        file: file.clone(),
        original,
        instrumented,
        metadata: meta.iids.clone(),
    })
}

fn cmd_trace(args: TraceArgs) -> Result<(), String> {
    let unit = load_unit_from_instrumented(&args.entry, &args.sidecar)?;
    let events = record_run(&unit, Some(Duration::from_secs_f64(args.timeout)))
        .map_err(|e| e.to_string())?;
    write_trace(&args.out, &events).map_err(|e| e.to_string())?;
    println!("recorded {} value-use event(s) to {}", events.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), String> {
    let ks: Vec<usize> = args
        .topk
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let events = read_trace(&args.trace).map_err(|e| e.to_string())?;
    let ds = deduplicate(events);
    let (train, heldout) = split(&ds, args.split, args.seed).map_err(|e| e.to_string())?;
    println!(
        "trace: {} events after dedup; split {} train / {} held-out",
        ds.events.len(),
        train.events.len(),
        heldout.events.len()
    );

    let predictor: Arc<dyn Predictor> = if args.predictor == PredictorKind::Frequency
        && args.predictor_args.table.is_none()
    {
        // Default frequency flow: fit on the training split.
        Arc::new(FrequencyPredictor::new(FrequencyTable::fit(
            frequency_observations(&train.events),
        )))
    } else {
        build_predictor(
            args.predictor,
            &args.predictor_args,
            args.seed,
            Duration::from_secs(10),
        )?
    };

    let granularity: Granularity = args.granularity.into();
    let report = match &args.sources {
        Some(root) => {
            let sidecar_path = args
                .sidecar
                .clone()
                .unwrap_or_else(|| root.join(SIDECAR_FILE_NAME));
            let sidecar = crate::instrument::Sidecar::load(&sidecar_path)
                .map_err(|e| e.to_string())?;
            let contexts = SidecarContexts::from_source_root(sidecar, root, args.window);
            evaluate_topk(predictor.as_ref(), &heldout.events, &ks, granularity, &contexts)
        }
        None => evaluate_topk(
            predictor.as_ref(),
            &heldout.events,
            &ks,
            granularity,
            &EmptyContexts,
        ),
    }
    .map_err(|e| e.to_string())?;

    println!(
        "evaluated {} event(s), skipped {}",
        report.evaluated, report.skipped
    );
    for (k, acc) in &report.accuracy {
        println!("top-{k} accuracy: {:.4}", acc);
    }
    for (kind, by_k) in &report.per_kind {
        let parts: Vec<String> = by_k
            .iter()
            .map(|(k, a)| format!("top-{k} {:.4}", a))
            .collect();
        println!("  {kind}: {}", parts.join(", "));
    }
    Ok(())
}

fn run_config_from(
    kind: PredictorKind,
    predictor_args: &PredictorArgs,
    id: String,
    granularity: Granularity,
    mode: ConcretizationMode,
    seed: u64,
    timeout: Duration,
    window: usize,
) -> Result<RunConfig, String> {
    if granularity == Granularity::Fine && mode == ConcretizationMode::Randomized {
        return Err("randomized mode requires coarse granularity".to_string());
    }
    let predictor = match kind {
        PredictorKind::Asis => RunPredictor::AsIs,
        other => RunPredictor::Injecting(build_predictor(other, predictor_args, seed, timeout)?),
    };
    Ok(RunConfig {
        id,
        predictor,
        granularity,
        mode,
        seed,
        timeout,
        window,
    })
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let source = std::fs::read_to_string(&args.file)
        .map_err(|e| format!("cannot read {}: {e}", args.file.display()))?;
    let timeout = Duration::from_secs_f64(args.timeout);
    let cfg = run_config_from(
        args.predictor,
        &args.predictor_args,
        config_id(args.predictor, args.granularity, args.mode),
        args.granularity.into(),
        args.mode.into(),
        args.seed,
        timeout,
        args.window,
    )?;
    let run = run_snippet(&source, &args.file.to_string_lossy(), &cfg);
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&run.report).expect("report serializes");
        std::fs::write(path, json).map_err(|e| e.to_string())?;
    }
    if args.show_output {
        print!("{}", run.output);
    }
    if !args.quiet {
        let r = &run.report;
        println!(
            "{}: coverage {:.1}% ({}/{} lines), {} injection(s), {:.2} ms{}",
            r.snippet,
            r.coverage() * 100.0,
            r.covered_lines.intersection(&r.countable_lines).count(),
            r.countable_lines.len(),
            r.injections.len(),
            r.duration_ms,
            match &r.terminal_exception {
                Some(t) => format!(
                    ", terminal {}: {} (line {:?})",
                    t.exc_type, t.message, t.line
                ),
                None if r.timed_out() => ", timed out".to_string(),
                None => String::new(),
            }
        );
    }
    Ok(())
}

fn config_id(kind: PredictorKind, granularity: GranularityArg, mode: ModeArg) -> String {
    let k = match kind {
        PredictorKind::Asis => return "asis".to_string(),
        PredictorKind::Naive => "naive",
        PredictorKind::Random => "random",
        PredictorKind::Frequency => "frequency",
        PredictorKind::Rest => "rest",
        PredictorKind::Stub => "stub",
    };
    let g = match granularity {
        GranularityArg::Fine => "fine",
        GranularityArg::Coarse => "coarse",
    };
    let m = match mode {
        ModeArg::Det => "det",
        ModeArg::Rand => "rand",
    };
    format!("{k}:{g}:{m}")
}

fn parse_config_spec(spec: &str) -> Result<(PredictorKind, GranularityArg, ModeArg), String> {
    if spec == "asis" {
        return Ok((PredictorKind::Asis, GranularityArg::Fine, ModeArg::Det));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!(
            "bad config spec '{spec}': expected asis or PREDICTOR:GRANULARITY:MODE"
        ));
    }
    let kind = match parts[0] {
        "naive" => PredictorKind::Naive,
        "random" => PredictorKind::Random,
        "frequency" => PredictorKind::Frequency,
        "rest" => PredictorKind::Rest,
        "stub" => PredictorKind::Stub,
        other => return Err(format!("unknown predictor '{other}'")),
    };
    let granularity = match parts[1] {
        "fine" => GranularityArg::Fine,
        "coarse" => GranularityArg::Coarse,
        other => return Err(format!("unknown granularity '{other}'")),
    };
    let mode = match parts[2] {
        "det" => ModeArg::Det,
        "rand" => ModeArg::Rand,
        other => return Err(format!("unknown mode '{other}'")),
    };
    Ok((kind, granularity, mode))
}

fn cmd_batch(args: BatchArgs) -> Result<(), String> {
    let snippets = load_corpus(&args.corpus).map_err(|e| e.to_string())?;
    let timeout = Duration::from_secs_f64(args.timeout);

    let mut summaries: Vec<BatchSummary> = Vec::new();
    for spec in &args.configs {
        let (kind, granularity, mode) = parse_config_spec(spec)?;
        let id = config_id(kind, granularity, mode);
        let reports = if args.no_isolate {
            let cfg = run_config_from(
                kind,
                &args.predictor_args,
                id.clone(),
                granularity.into(),
                mode.into(),
                args.seed,
                timeout,
                512,
            )?;
            snippets
                .iter()
                .map(|s| run_snippet(&s.source, &s.id, &cfg).report)
                .collect::<Vec<_>>()
        } else {
            run_isolated(&snippets, &args, kind, granularity, mode, &id, timeout)?
        };
        let summary = BatchSummary::from_reports(id, reports);
        println!(
            "{}: mean coverage {:.4}, fully executed {:.1}%, {:.3} ms per covered line",
            summary.config,
            summary.mean_coverage,
            summary.fully_executed_fraction * 100.0,
            summary.mean_ms_per_covered_line
        );
        summaries.push(summary);
    }

    if args.compare && summaries.len() >= 2 {
        let cmp = compare_summaries(&summaries[0], &summaries[1]).map_err(|e| e.to_string())?;
        println!(
            "{} vs {}: mean delta {:+.4}, Wilcoxon p = {:.4e} ({} nonzero pairs)",
            cmp.config_a, cmp.config_b, cmp.mean_delta, cmp.wilcoxon.p_value, cmp.wilcoxon.n
        );
    }

    if let Some(path) = &args.csv {
        write_batch_csv(path, &summaries).map_err(|e| e.to_string())?;
        println!("per-snippet rows written to {}", path.display());
    }
    if let Some(path) = &args.json {
        write_batch_json(path, &summaries).map_err(|e| e.to_string())?;
        println!("summaries written to {}", path.display());
    }
    Ok(())
}

/// Runs each snippet in a separate worker process (side-effect and crash
/// isolation), reusing the `run` subcommand with a report file.
fn run_isolated(
    snippets: &[Snippet],
    args: &BatchArgs,
    kind: PredictorKind,
    granularity: GranularityArg,
    mode: ModeArg,
    id: &str,
    timeout: Duration,
) -> Result<Vec<crate::harness::RunReport>, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let workdir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::with_capacity(snippets.len());
    for (i, snippet) in snippets.iter().enumerate() {
        let src_path = workdir.path().join(format!("snippet_{i}.py"));
        let report_path = workdir.path().join(format!("report_{i}.json"));
        std::fs::write(&src_path, &snippet.source).map_err(|e| e.to_string())?;

        let mut cmd = std::process::Command::new(&exe);
        cmd.arg("run")
            .arg(&src_path)
            .arg("--predictor")
            .arg(predictor_flag(kind))
            .arg("--granularity")
            .arg(match granularity {
                GranularityArg::Fine => "fine",
                GranularityArg::Coarse => "coarse",
            })
            .arg("--mode")
            .arg(match mode {
                ModeArg::Det => "det",
                ModeArg::Rand => "rand",
            })
            .arg("--seed")
            .arg(args.seed.to_string())
            .arg("--timeout")
            .arg(args.timeout.to_string())
            .arg("--report")
            .arg(&report_path)
            .arg("--quiet");
        if let Some(t) = &args.predictor_args.table {
            cmd.arg("--table").arg(t);
        }
        if let Some(u) = &args.predictor_args.url {
            cmd.arg("--url").arg(u);
        }
        if let Some(s) = &args.predictor_args.script {
            cmd.arg("--script").arg(s);
        }
        let mut child = cmd
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot spawn worker: {e}"))?;

        // The worker enforces its own deadline; the hard kill is a backstop.
        let hard_deadline = std::time::Instant::now() + timeout * 2 + Duration::from_secs(2);
        let status = loop {
            match child.try_wait().map_err(|e| e.to_string())? {
                Some(status) => break Some(status),
                None if std::time::Instant::now() > hard_deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };

        let mut report: Option<crate::harness::RunReport> = None;
        if status.is_some_and(|s| s.success()) {
            if let Ok(text) = std::fs::read_to_string(&report_path) {
                report = serde_json::from_str(&text).ok();
            }
        }
        let mut report = report.unwrap_or_else(|| crate::harness::RunReport {
            snippet: snippet.id.clone(),
            config: id.to_string(),
            countable_lines: Default::default(),
            executed_lines: Default::default(),
            covered_lines: Default::default(),
            terminal_exception: None,
            injections: Vec::new(),
            degraded_events: Vec::new(),
            duration_ms: 0.0,
            flags: vec!["worker-failed".to_string()],
        });
        // Worker reports carry the temp path; restore the corpus-relative id.
        report.snippet = snippet.id.clone();
        report.config = id.to_string();
        reports.push(report);
    }
    Ok(reports)
}

fn predictor_flag(kind: PredictorKind) -> &'static str {
    match kind {
        PredictorKind::Asis => "asis",
        PredictorKind::Naive => "naive",
        PredictorKind::Random => "random",
        PredictorKind::Frequency => "frequency",
        PredictorKind::Rest => "rest",
        PredictorKind::Stub => "stub",
    }
}

fn cmd_diff(args: DiffArgs) -> Result<(), String> {
    let timeout = Duration::from_secs_f64(args.timeout);
    let predictor = match args.predictor {
        PredictorKind::Asis => return Err("diff-commit needs an injecting predictor".to_string()),
        other => build_predictor(other, &args.predictor_args, args.seed, timeout)?,
    };
    let config = DifferConfig {
        granularity: args.granularity.into(),
        mode: args.mode.into(),
        seed: args.seed,
        timeout,
    };

    let mut results = Vec::new();
    match (&args.old, &args.new, &args.pairs) {
        (Some(old), Some(new), None) => {
            let old_src = std::fs::read_to_string(old).map_err(|e| e.to_string())?;
            let new_src = std::fs::read_to_string(new).map_err(|e| e.to_string())?;
            let pair = resolve_pair(&old_src, &new_src)?;
            results.push((pair.name.clone(), classify(&pair, predictor, &config)));
        }
        (None, None, Some(manifest)) => {
            #[derive(serde::Deserialize)]
            struct ManifestEntry {
                old: PathBuf,
                new: PathBuf,
            }
            let text = std::fs::read_to_string(manifest).map_err(|e| e.to_string())?;
            let entries: Vec<ManifestEntry> =
                serde_json::from_str(&text).map_err(|e| e.to_string())?;
            for entry in entries {
                let old_src = std::fs::read_to_string(&entry.old).map_err(|e| e.to_string())?;
                let new_src = std::fs::read_to_string(&entry.new).map_err(|e| e.to_string())?;
                match resolve_pair(&old_src, &new_src) {
                    Ok(pair) => {
                        results.push((pair.name.clone(), classify(&pair, predictor.clone(), &config)))
                    }
                    Err(e) => eprintln!("skipping {}: {e}", entry.old.display()),
                }
            }
        }
        _ => return Err("pass either --old and --new, or --pairs MANIFEST".to_string()),
    }

    for (name, result) in &results {
        let verdict = match &result.outcome {
            DiffOutcome::Exceptional { detail } => format!("exceptional ({detail})"),
            DiffOutcome::SameBehavior => {
                "same behavior (no difference witnessed; not a guarantee)".to_string()
            }
            DiffOutcome::SemanticsChanging { rule, detail } => {
                format!("SEMANTICS-CHANGING [{}] {detail}", rule.as_str())
            }
        };
        println!("{name}: {verdict}");
    }
    if let Some(path) = &args.report {
        let payload: Vec<serde_json::Value> = results
            .iter()
            .map(|(name, r)| {
                serde_json::json!({
                    "function": name,
                    "result": r,
                })
            })
            .collect();
        std::fs::write(
            path,
            serde_json::to_string_pretty(&payload).expect("serializes"),
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Accepts either two single-function sources or two whole-file revisions
/// from which the single changed function is extracted.
fn resolve_pair(old_src: &str, new_src: &str) -> Result<FunctionPair, String> {
    match FunctionPair::parse(old_src, new_src) {
        Ok(pair) => Ok(pair),
        Err(_) => pair_changed_functions(old_src, new_src).map_err(|e| e.to_string()),
    }
}

fn cmd_serve(args: ServeArgs) -> Result<(), String> {
    let predictor = match args.predictor {
        PredictorKind::Asis => return Err("serve needs a predictor".to_string()),
        other => build_predictor(
            other,
            &args.predictor_args,
            args.seed,
            Duration::from_secs(10),
        )?,
    };
    let description = predictor.describe();
    let server = serve(predictor, args.port).map_err(|e| e.to_string())?;
    println!("serving {description} on {}", server.base_url());
    println!("POST /predict, GET /health; ctrl-c to stop");
    loop {
        std::thread::sleep(Duration::from_secs(3600));
    }
}
