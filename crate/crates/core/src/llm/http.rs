//! OpenAI-compatible `/chat/completions` backend.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{BackendError, LlmBackend, LlmCall};
use super::template::SpeakerRole;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-1106".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
        }
    }
}

impl HttpConfig {
    /// Defaults overridden by `DRAMATURG_LLM_BASE_URL`, `DRAMATURG_LLM_MODEL`,
    /// `DRAMATURG_LLM_API_KEY_ENV` and `DRAMATURG_LLM_TIMEOUT_SECS`.
    pub fn from_env() -> Self {
        let mut c = HttpConfig::default();
        if let Ok(v) = std::env::var("DRAMATURG_LLM_BASE_URL") {
            c.base_url = v;
        }
        if let Ok(v) = std::env::var("DRAMATURG_LLM_MODEL") {
            c.model = v;
        }
        if let Ok(v) = std::env::var("DRAMATURG_LLM_API_KEY_ENV") {
            c.api_key_env = v;
        }
        if let Some(v) = std::env::var("DRAMATURG_LLM_TIMEOUT_SECS")
            .ok()
            .and_then(|v| v.parse().ok())
        {
            c.timeout_secs = v;
        }
        c
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok();
        Self::with_key(config, api_key)
    }

    pub fn with_key(config: HttpConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, api_key, agent }
    }

    fn body(&self, call: &LlmCall<'_>) -> Value {
        let messages: Vec<Value> = call
            .messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    SpeakerRole::System => "system",
                    SpeakerRole::User => "user",
                    SpeakerRole::Assistant => "assistant",
                };
                json!({"role": role, "content": m.text})
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "max_tokens": call.hints.max_output_tokens,
            "temperature": call.hints.temperature,
        })
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.body(call))
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Unavailable(format!(
                "HTTP {status} from {url}: {}",
                detail.chars().take(200).collect::<String>()
            )));
        }
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Unavailable(format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Unavailable("response has no message content".into()))
    }
}
