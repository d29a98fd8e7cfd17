//! Corpus loading, batch execution, and summary emission.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_snippet, RunConfig, RunReport};

#[derive(Debug, Clone)]
pub struct Snippet {
    pub id: String,
    pub source: String,
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("corpus {0} contains no .py snippets")]
    EmptyCorpus(std::path::PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Loads every `.py` file under `dir` (sorted by relative path).
pub fn load_corpus(dir: &Path) -> Result<Vec<Snippet>, BatchError> {
    let mut snippets = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| BatchError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "py") {
            let rel = entry
                .path()
                .strip_prefix(dir)
                .unwrap_or(entry.path())
                .to_string_lossy()
                .into_owned();
            let source = std::fs::read_to_string(entry.path()).map_err(|e| BatchError::Io {
                path: entry.path().to_path_buf(),
                source: e,
            })?;
            snippets.push(Snippet { id: rel, source });
        }
    }
    if snippets.is_empty() {
        return Err(BatchError::EmptyCorpus(dir.to_path_buf()));
    }
    Ok(snippets)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchSummary {
    pub config: String,
    pub reports: Vec<RunReport>,
    pub mean_coverage: f64,
    pub fully_executed_fraction: f64,
    pub mean_ms_per_covered_line: f64,
}

impl BatchSummary {
    pub fn from_reports(config: impl Into<String>, reports: Vec<RunReport>) -> BatchSummary {
        let n = reports.len().max(1) as f64;
        let mean_coverage = reports.iter().map(|r| r.coverage()).sum::<f64>() / n;
        let fully = reports.iter().filter(|r| r.fully_executed()).count() as f64 / n;
        let total_ms: f64 = reports.iter().map(|r| r.duration_ms).sum();
        let total_covered: usize = reports
            .iter()
            .map(|r| r.covered_lines.intersection(&r.countable_lines).count())
            .sum();
        let mean_ms_per_covered_line = if total_covered == 0 {
            0.0
        } else {
            total_ms / total_covered as f64
        };
        BatchSummary {
            config: config.into(),
            reports,
            mean_coverage,
            fully_executed_fraction: fully,
            mean_ms_per_covered_line,
        }
    }
}

/// Runs every snippet under every configuration, in-process and
/// sequentially (deterministic given seeds). Process-isolated batches are a
/// CLI concern layered on top of this.
pub fn run_batch(snippets: &[Snippet], configs: &[RunConfig]) -> Vec<BatchSummary> {
    configs
        .iter()
        .map(|cfg| {
            let reports = snippets
                .iter()
                .map(|s| run_snippet(&s.source, &s.id, cfg).report)
                .collect();
            BatchSummary::from_reports(cfg.id.clone(), reports)
        })
        .collect()
}

/// One CSV row per (config, snippet).
pub fn write_batch_csv(path: &Path, summaries: &[BatchSummary]) -> Result<(), BatchError> {
    let io_err = |e: std::io::Error| BatchError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(e) => io_err(e),
        other => io_err(std::io::Error::other(format!("{other:?}"))),
    })?;
    w.write_record([
        "config",
        "snippet",
        "countable",
        "covered",
        "coverage",
        "fully_executed",
        "syntax_error",
        "timed_out",
        "injections",
        "duration_ms",
    ])
    .map_err(|e| io_err(std::io::Error::other(e)))?;
    for s in summaries {
        for r in &s.reports {
            w.write_record([
                s.config.clone(),
                r.snippet.clone(),
                r.countable_lines.len().to_string(),
                r.covered_lines
                    .intersection(&r.countable_lines)
                    .count()
                    .to_string(),
                format!("{:.6}", r.coverage()),
                r.fully_executed().to_string(),
                r.syntax_error().to_string(),
                r.timed_out().to_string(),
                r.injections.len().to_string(),
                format!("{:.3}", r.duration_ms),
            ])
            .map_err(|e| io_err(std::io::Error::other(e)))?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_batch_json(path: &Path, summaries: &[BatchSummary]) -> Result<(), BatchError> {
    let text = serde_json::to_string_pretty(summaries).expect("summaries serialize");
    std::fs::write(path, text).map_err(|e| BatchError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
