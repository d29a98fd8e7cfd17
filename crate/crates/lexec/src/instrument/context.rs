//! Model-input construction: the code context around a use-site.
//!
//! The context is taken from the *original* source, never the instrumented
//! one, so that prediction-time inputs match what a model trained on
//! uninstrumented code saw. Pre- and post-context are raw text slices whose
//! extent is measured in lexical tokens: each side is truncated to half the
//! window budget. The masked span itself is excluded.

use lexec_lang::lexer::lex;
use lexec_lang::token::Token;

use crate::abstraction::Granularity;
use crate::predict::PredictorQuery;

use super::IidMetadata;

#[derive(Debug, thiserror::Error)]
pub enum ContextError {
    #[error("site span {start}..{end} does not fit source of length {len} (sidecar/source mismatch)")]
    SpanOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("source does not lex: {0}")]
    Unlexable(String),
}

/// Builds the predictor query for one instrumentation site.
pub fn build_model_input(
    meta: &IidMetadata,
    source: &str,
    window_budget: usize,
    granularity: Granularity,
    top_k: usize,
) -> Result<PredictorQuery, ContextError> {
    let chars: Vec<char> = source.chars().collect();
    if meta.start >= meta.end || meta.end > chars.len() {
        return Err(ContextError::SpanOutOfBounds {
            start: meta.start,
            end: meta.end,
            len: chars.len(),
        });
    }
    let lexed = lex(source).map_err(|e| ContextError::Unlexable(e.to_string()))?;
    let tokens: Vec<&Token> = lexed.lexical_tokens().collect();
    let half = window_budget / 2;

    let pre: Vec<&&Token> = tokens.iter().filter(|t| t.span.end <= meta.start).collect();
    let post: Vec<&&Token> = tokens.iter().filter(|t| t.span.start >= meta.end).collect();

    let pre_context = if half == 0 || pre.is_empty() {
        String::new()
    } else {
        let first = pre[pre.len().saturating_sub(half)];
        chars[first.span.start..meta.start].iter().collect()
    };
    let post_context = if half == 0 || post.is_empty() {
        String::new()
    } else {
        let last = post[half.min(post.len()) - 1];
        chars[meta.end..last.span.end].iter().collect()
    };

    Ok(PredictorQuery {
        name: meta.name.clone(),
        kind: meta.kind,
        pre_context,
        post_context,
        granularity,
        top_k,
    })
}
