//! HTTP-backed predictor client.

use std::time::Duration;

use super::{PredictError, Predictor, PredictorQuery, PredictorResponse, WireResponse};

pub struct RemotePredictor {
    base_url: String,
    client: reqwest::blocking::Client,
}

/// Builds a client for a served predictor. `base_url` is scheme://host:port
/// with no trailing path.
pub fn remote_predictor(
    base_url: impl Into<String>,
    timeout: Duration,
) -> Result<RemotePredictor, PredictError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| PredictError::Transport(e.to_string()))?;
    Ok(RemotePredictor {
        base_url: base_url.into().trim_end_matches('/').to_string(),
        client,
    })
}

impl RemotePredictor {
    pub fn health(&self) -> Result<(), PredictError> {
        let resp = self
            .client
            .get(format!("{}/health", self.base_url))
            .send()
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(PredictError::Transport(format!(
                "health returned {}",
                resp.status()
            )));
        }
        Ok(())
    }
}

impl Predictor for RemotePredictor {
    fn describe(&self) -> String {
        format!("rest({})", self.base_url)
    }

    fn predict(&self, query: &PredictorQuery) -> Result<PredictorResponse, PredictError> {
        let resp = self
            .client
            .post(format!("{}/predict", self.base_url))
            .json(query)
            .send()
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(PredictError::Transport(format!(
                "predict returned {status}: {body}"
            )));
        }
        let wire: WireResponse = resp
            .json()
            .map_err(|e| PredictError::Schema(format!("malformed response body: {e}")))?;
        wire.into_response(query.granularity, query.top_k.max(1))
    }
}
