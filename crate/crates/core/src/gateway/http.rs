use serde_json::json;

use super::{Backend, Completion, GatewayError, WireRequest};

/// Chat-completion-style endpoint. Only the messages and sampling fields go
/// over the wire; the structured payload stays local.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(endpoint: String, api_key: Option<String>) -> Self {
        HttpBackend { endpoint, api_key, client: reqwest::blocking::Client::new() }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        let body = json!({
            "model": wire.model,
            "messages": wire.messages,
            "temperature": wire.temperature,
            "seed": wire.seed,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(GatewayError::Transport(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(GatewayError::InvalidRequest(format!("status {status}")));
        }
        let v: serde_json::Value = resp.json().map_err(|e| GatewayError::Malformed(e.to_string()))?;
        let message = &v["choices"][0]["message"];
        let content = message["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Malformed("reply has no choices[0].message.content".into()))?;
        let reasoning = message["reasoning_content"].as_str().or_else(|| message["reasoning"].as_str()).unwrap_or("");
        Ok(Completion { reasoning: reasoning.to_string(), content: content.to_string() })
    }
}
