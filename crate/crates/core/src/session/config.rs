use serde::{Deserialize, Serialize};

use crate::actor::{default_abnormal_markers, ActorConfig, SimilarityRule};
use crate::director::DirectorConfig;
use crate::llm::GatewayConfig;
use crate::retrieval::RetrievalConfig;

/// Everything tunable about one play session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub script_line_budget: usize,
    pub check_start: usize,
    pub force_complete: usize,
    pub summarize_window: usize,
    pub keep_suffix: usize,
    pub similarity_threshold: f64,
    pub similarity_rule: SimilarityRule,
    pub retrieval_k: usize,
    pub instruction_enabled: bool,
    pub monologue_enabled: bool,
    pub player_cooldown_turns: usize,
    pub revision_retries: usize,
    pub generation_retries: usize,
    /// Maximum model calls per session; unlimited when absent.
    pub call_cap: Option<usize>,
    /// After an act, record summary points naming a scene partner as a new
    /// impression of that partner.
    pub impression_update: bool,
    pub abnormal_markers: Vec<String>,
    pub retrieval: RetrievalConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            script_line_budget: 5,
            check_start: 5,
            force_complete: 9,
            summarize_window: 16,
            keep_suffix: 8,
            similarity_threshold: 0.4,
            similarity_rule: SimilarityRule::RejectBelow,
            retrieval_k: 5,
            instruction_enabled: true,
            monologue_enabled: true,
            player_cooldown_turns: 1,
            revision_retries: 2,
            generation_retries: 2,
            call_cap: None,
            impression_update: false,
            abnormal_markers: default_abnormal_markers(),
            retrieval: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid engine config: {0}")]
pub struct ConfigError(pub String);

impl EngineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("script_line_budget", self.script_line_budget),
            ("check_start", self.check_start),
            ("force_complete", self.force_complete),
            ("summarize_window", self.summarize_window),
            ("keep_suffix", self.keep_suffix),
            ("retrieval_k", self.retrieval_k),
            ("player_cooldown_turns", self.player_cooldown_turns),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError(format!("{name} must be positive")));
        }
        if self.check_start > self.force_complete {
            return Err(ConfigError("check_start must not exceed force_complete".into()));
        }
        if self.keep_suffix >= self.summarize_window {
            return Err(ConfigError("keep_suffix must be smaller than summarize_window".into()));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(ConfigError("similarity_threshold must be in (0, 1]".into()));
        }
        if !(self.retrieval.recency_decay > 0.0 && self.retrieval.recency_decay <= 1.0) {
            return Err(ConfigError("recency_decay must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn actor(&self) -> ActorConfig {
        ActorConfig {
            summarize_window: self.summarize_window,
            keep_suffix: self.keep_suffix,
            retrieval_k: self.retrieval_k,
            similarity_threshold: self.similarity_threshold,
            similarity_rule: self.similarity_rule,
            recent_own: 3,
            revision_retries: self.revision_retries,
            instruction_enabled: self.instruction_enabled,
            monologue_enabled: self.monologue_enabled,
            abnormal_markers: self.abnormal_markers.clone(),
            context_turns: 3,
        }
    }

    pub fn director(&self) -> DirectorConfig {
        DirectorConfig {
            line_budget: self.script_line_budget,
            check_start: self.check_start,
            force_complete: self.force_complete,
            retrieval_k: self.retrieval_k,
            monologue_enabled: self.monologue_enabled,
        }
    }

    pub fn gateway(&self) -> GatewayConfig {
        GatewayConfig {
            call_cap: self.call_cap,
            retries: self.generation_retries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = EngineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.script_line_budget, c.check_start, c.force_complete), (5, 5, 9));
        assert_eq!((c.summarize_window, c.keep_suffix), (16, 8));
        assert_eq!(c.similarity_threshold, 0.4);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let c: EngineConfig = toml::from_str("force_complete = 7\ninstruction_enabled = false").unwrap();
        assert_eq!(c.force_complete, 7);
        assert!(!c.instruction_enabled);
        assert_eq!(c.check_start, 5);
    }

    #[test]
    fn rejects_inverted_limits() {
        let c = EngineConfig {
            check_start: 10,
            ..EngineConfig::default()
        };
        assert!(c.validate().is_err());
        let c = EngineConfig {
            keep_suffix: 16,
            ..EngineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
