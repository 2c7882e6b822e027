use std::time::Duration;

use async_trait::async_trait;
use base64::Engine as _;
use serde_json::{json, Value};

use crate::config::ProviderConfig;
use crate::error::ProviderError;
use crate::provider::ChatProvider;
use crate::request::{ChatRequest, Role};

/// Chat-completions style HTTP provider (`POST {endpoint}/chat/completions`,
/// `POST {endpoint}/embeddings`).
#[derive(Debug, Clone)]
pub struct HttpProvider {
    client: reqwest::Client,
    endpoint: String,
    model_id: String,
    embed_model_id: String,
    api_key: Option<String>,
}

impl HttpProvider {
    pub fn new(cfg: &ProviderConfig) -> Self {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("reqwest client");
        Self {
            client,
            endpoint: cfg.endpoint.trim_end_matches('/').to_string(),
            model_id: cfg.model_id.clone(),
            embed_model_id: cfg.embed_model_id.clone(),
            api_key: cfg.api_key.clone(),
        }
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| match &m.image_png {
                Some(png) if m.role == Role::User => {
                    let data = base64::engine::general_purpose::STANDARD.encode(png);
                    json!({
                        "role": m.role.as_str(),
                        "content": [
                            {"type": "text", "text": m.content},
                            {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}}
                        ]
                    })
                }
                _ => json!({"role": m.role.as_str(), "content": m.content}),
            })
            .collect();
        let mut body = json!({
            "model": self.model_id,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        });
        if req.response_schema.is_some() {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }

    async fn post(&self, path: &str, body: &Value) -> Result<Value, ProviderError> {
        let mut builder = self.client.post(format!("{}{}", self.endpoint, path)).json(body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().await.map_err(|e| ProviderError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(ProviderError::RateLimited { retry_after });
        }
        if status.is_server_error() {
            return Err(ProviderError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            return Err(ProviderError::Fatal(format!("HTTP {status}: {text}")));
        }
        resp.json::<Value>().await.map_err(|e| ProviderError::Transient(e.to_string()))
    }
}

#[async_trait]
impl ChatProvider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let value = self.post("/chat/completions", &self.body(request)).await?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transient("response carried no message content".into()))
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let body = json!({"model": self.embed_model_id, "input": text});
        let value = self.post("/embeddings", &body).await?;
        let arr = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| ProviderError::Transient("response carried no embedding".into()))?;
        arr.iter()
            .map(|v| v.as_f64().ok_or_else(|| ProviderError::Transient("non-numeric embedding".into())))
            .collect()
    }
}
