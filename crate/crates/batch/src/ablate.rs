use dramaturg_core::llm::BackendSpec;
use dramaturg_core::script::ScriptSetting;
use dramaturg_core::session::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::judge::{judge_storylines, JudgeReport};
use crate::run::{run_batch, BatchError, BatchOptions, RunOutcome};
use crate::stats::RunStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationGroup {
    pub name: String,
    pub config: EngineConfig,
    pub stats: RunStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub groups: Vec<AblationGroup>,
}

/// The full system, then without director instructions, then without
/// monologues.
pub fn ablation_configs(base: &EngineConfig) -> Vec<(&'static str, EngineConfig)> {
    vec![
        ("full", base.clone()),
        (
            "no-instruction",
            EngineConfig {
                instruction_enabled: false,
                ..base.clone()
            },
        ),
        (
            "no-monologue",
            EngineConfig {
                monologue_enabled: false,
                ..base.clone()
            },
        ),
    ]
}

/// Each group's name and runs, in group order.
pub type GroupRuns = Vec<(String, Vec<RunOutcome>)>;

/// Run the same batch under each ablation config, optionally judging every
/// group. Returns the grouped report and each group's runs.
pub fn ablate(
    setting: &ScriptSetting,
    base: &EngineConfig,
    backend: &BackendSpec,
    options: &BatchOptions,
    judge: Option<&BackendSpec>,
) -> Result<(AblationReport, GroupRuns), BatchError> {
    let mut groups = Vec::new();
    let mut all_runs = Vec::new();
    for (name, config) in ablation_configs(base) {
        let out = run_batch(setting, &config, backend, options)?;
        let judge = judge.map(|judge_backend| {
            judge_storylines(
                out.runs
                    .iter()
                    .filter(|r| r.succeeded())
                    .map(|r| (r.run_id.as_str(), &r.record)),
                judge_backend.build(options.seed),
            )
        });
        groups.push(AblationGroup {
            name: name.to_string(),
            config,
            stats: out.stats,
            judge,
        });
        all_runs.push((name.to_string(), out.runs));
    }
    Ok((AblationReport { groups }, all_runs))
}
