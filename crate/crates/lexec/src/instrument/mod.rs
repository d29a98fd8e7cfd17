//! Source-to-source instrumentation.
//!
//! Rewrites every variable read into the name loader, every attribute read
//! into the attribute loader, and every call into the call loader, then
//! prepends a one-line import of the three loaders. All replacement text is
//! inline, so the instrumented file has exactly the original line structure
//! shifted down by the one preamble line — coverage results map back by
//! subtracting [`PREAMBLE_LINES`].

mod context;
mod rewriter;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lexec_lang::{parse_program, LangError};

use crate::ValueKind;

pub use context::{build_model_input, ContextError};

/// Number of physical lines the loader-import preamble adds.
pub const PREAMBLE_LINES: u32 = 1;

pub fn preamble() -> String {
    format!(
        "from {} import {}, {}, {}\n",
        lexec_lang::RUNTIME_MODULE,
        lexec_lang::NAME_LOADER_FN,
        lexec_lang::ATTR_LOADER_FN,
        lexec_lang::CALL_LOADER_FN,
    )
}

/// One instrumentation site: a dense id, the character span of the wrapped
/// read in the *original* source, the referenced name, and the use kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IidMetadata {
    pub iid: u32,
    pub start: usize,
    pub end: usize,
    pub name: String,
    pub kind: ValueKind,
}

/// Result of instrumenting one file.
#[derive(Debug, Clone)]
pub struct InstrumentedUnit {
    /// Identifier used as the sidecar key (relative path for trees).
    pub file: String,
    pub original: String,
    pub instrumented: String,
    pub metadata: Vec<IidMetadata>,
}

#[derive(Debug, thiserror::Error)]
pub enum InstrumentError {
    /// The input does not parse; the harness counts such snippets as
    /// non-executable instead of crashing.
    #[error("{file}: syntax error at line {line}: {message}")]
    Syntax {
        file: String,
        line: u32,
        message: String,
    },
    #[error("instrumented output failed to re-parse (internal error): {0}")]
    Reparse(LangError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Instruments a single source text.
pub fn instrument_source(source: &str, file_id: &str) -> Result<InstrumentedUnit, InstrumentError> {
    let program = parse_program(source).map_err(|e| InstrumentError::Syntax {
        file: file_id.to_string(),
        line: e.line,
        message: e.message,
    })?;
    let (body, metadata) = rewriter::rewrite(source, &program);
    let instrumented = format!("{}{}", preamble(), body);
    if let Err(e) = parse_program(&instrumented) {
        return Err(InstrumentError::Reparse(e));
    }
    Ok(InstrumentedUnit {
        file: file_id.to_string(),
        original: source.to_string(),
        instrumented,
        metadata,
    })
}

// ---------------------------------------------------------------------------
// Sidecar

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SidecarFile {
    pub iids: Vec<IidMetadata>,
}

/// Metadata sidecar for an instrumented tree: one entry per file, keyed by
/// the file's relative path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Sidecar {
    pub files: BTreeMap<String, SidecarFile>,
}

impl Sidecar {
    pub fn from_unit(unit: &InstrumentedUnit) -> Sidecar {
        let mut files = BTreeMap::new();
        files.insert(
            unit.file.clone(),
            SidecarFile {
                iids: unit.metadata.clone(),
            },
        );
        Sidecar { files }
    }

    pub fn insert_unit(&mut self, unit: &InstrumentedUnit) {
        self.files.insert(
            unit.file.clone(),
            SidecarFile {
                iids: unit.metadata.clone(),
            },
        );
    }

    pub fn lookup(&self, file: &str, iid: u32) -> Option<&IidMetadata> {
        self.files
            .get(file)
            .and_then(|f| f.iids.get(iid as usize))
            .filter(|m| m.iid == iid)
    }

    pub fn load(path: &Path) -> Result<Sidecar, InstrumentError> {
        let text = std::fs::read_to_string(path).map_err(|e| InstrumentError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| InstrumentError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), InstrumentError> {
        let text = serde_json::to_string_pretty(self).expect("sidecar serializes");
        std::fs::write(path, text).map_err(|e| InstrumentError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Default file name of the combined sidecar written by [`instrument_tree`].
pub const SIDECAR_FILE_NAME: &str = "lexec-sidecar.json";

/// Per-file failure recorded while instrumenting a tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkipEntry {
    pub file: String,
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct TreeReport {
    pub units: Vec<InstrumentedUnit>,
    pub skipped: Vec<SkipEntry>,
    pub sidecar: Sidecar,
}

/// Instruments every `.py` file under `root`, writing instrumented files
/// under `out` (preserving relative paths) plus a combined sidecar. Files
/// that fail to parse are listed in the skip report.
pub fn instrument_tree(root: &Path, out: &Path) -> Result<TreeReport, InstrumentError> {
    let mut report = TreeReport::default();
    std::fs::create_dir_all(out).map_err(|e| InstrumentError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;

    let mut sources: Vec<(PathBuf, String)> = Vec::new();
    if root.is_file() {
        let rel = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "snippet.py".to_string());
        sources.push((root.to_path_buf(), rel));
    } else {
        for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| InstrumentError::Io {
                path: root.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
            if entry.file_type().is_file()
                && entry.path().extension().is_some_and(|e| e == "py")
            {
                let rel = entry
                    .path()
                    .strip_prefix(root)
                    .unwrap_or(entry.path())
                    .to_string_lossy()
                    .into_owned();
                sources.push((entry.path().to_path_buf(), rel));
            }
        }
    }

    for (path, rel) in sources {
        let text = std::fs::read_to_string(&path).map_err(|e| InstrumentError::Io {
            path: path.clone(),
            source: e,
        })?;
        match instrument_source(&text, &rel) {
            Ok(unit) => {
                let dest = out.join(&rel);
                if let Some(parent) = dest.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| InstrumentError::Io {
                        path: parent.to_path_buf(),
                        source: e,
                    })?;
                }
                std::fs::write(&dest, &unit.instrumented).map_err(|e| InstrumentError::Io {
                    path: dest.clone(),
                    source: e,
                })?;
                report.sidecar.insert_unit(&unit);
                report.units.push(unit);
            }
            Err(InstrumentError::Syntax { file, line, message }) => {
                report.skipped.push(SkipEntry {
                    file,
                    line,
                    message,
                });
            }
            Err(other) => return Err(other),
        }
    }

    report.sidecar.save(&out.join(SIDECAR_FILE_NAME))?;
    Ok(report)
}

/// Counts loader-call occurrences in instrumented text. The import preamble
/// mentions the loader names without an opening parenthesis, so it never
/// contributes.
pub fn count_loader_calls(instrumented: &str) -> usize {
    [
        lexec_lang::NAME_LOADER_FN,
        lexec_lang::ATTR_LOADER_FN,
        lexec_lang::CALL_LOADER_FN,
    ]
    .iter()
    .map(|name| {
        let needle = format!("{name}(");
        instrumented.matches(&needle).count()
    })
    .sum()
}
