use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backend::LlmBackend;
use super::demo::DemoResponder;
use super::http::{HttpBackend, HttpConfig};

/// Which model provider a session talks to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// The offline responder; `completion_chance` is the probability that an
    /// objective check passes.
    Demo {
        #[serde(default = "half")]
        completion_chance: f64,
    },
    Http(HttpConfig),
}

fn half() -> f64 {
    0.5
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Demo { completion_chance: 0.5 }
    }
}

impl BackendSpec {
    pub fn build(&self, seed: u64) -> Arc<dyn LlmBackend> {
        match self {
            BackendSpec::Demo { completion_chance } => {
                Arc::new(DemoResponder::new(seed).with_completion_chance(*completion_chance))
            }
            BackendSpec::Http(config) => Arc::new(HttpBackend::new(config.clone())),
        }
    }

    /// `demo`, `demo:<chance>` or `http`; http settings come from the environment.
    pub fn parse(text: &str) -> Result<Self, String> {
        match text.split_once(':') {
            None if text == "demo" => Ok(BackendSpec::default()),
            None if text == "http" => Ok(BackendSpec::Http(HttpConfig::from_env())),
            Some(("demo", p)) => p
                .parse::<f64>()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .map(|completion_chance| BackendSpec::Demo { completion_chance })
                .ok_or_else(|| format!("bad completion chance `{p}`")),
            _ => Err(format!("unknown backend `{text}` (expected demo, demo:<p> or http)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!(BackendSpec::parse("demo").unwrap(), BackendSpec::default());
        assert_eq!(
            BackendSpec::parse("demo:1").unwrap(),
            BackendSpec::Demo { completion_chance: 1.0 }
        );
        assert!(matches!(BackendSpec::parse("http").unwrap(), BackendSpec::Http(_)));
        assert!(BackendSpec::parse("demo:2").is_err());
        assert!(BackendSpec::parse("gpt").is_err());
    }

    #[test]
    fn serde_shape() {
        let b: BackendSpec = serde_json::from_str(r#"{"kind": "demo"}"#).unwrap();
        assert_eq!(b, BackendSpec::default());
    }
}
