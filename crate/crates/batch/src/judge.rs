use std::sync::Arc;

use dramaturg_core::llm::parse::{parse_judge, JudgeScores};
use dramaturg_core::llm::{Bindings, Gateway, LlmBackend, LlmError, LlmRequest, TemplateId};
use dramaturg_core::script::load_script;
use dramaturg_core::session::PlayRecord;
use serde::{Deserialize, Serialize};

pub const JUDGE_LABEL: &str = "judge-dependent scores on a 1-4 agreement scale; not a ground truth";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunJudgement {
    pub run_id: String,
    pub scores: Option<JudgeScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionMeans {
    pub logicality: f64,
    pub coherence: f64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReport {
    pub label: String,
    pub scored: usize,
    pub skipped: usize,
    /// Absent when no run could be scored.
    pub means: Option<DimensionMeans>,
    pub runs: Vec<RunJudgement>,
}

/// Bindings for the judge prompt: title, character sheet and the full script.
pub fn judge_bindings(record: &PlayRecord) -> Bindings {
    let descriptions = match load_script(record.script.as_bytes()) {
        Ok(setting) => setting
            .characters
            .iter()
            .map(|c| format!("{}: {}", c.role, c.description))
            .collect::<Vec<_>>()
            .join("\n"),
        Err(e) => {
            log::warn!("record script does not load: {e}");
            String::new()
        }
    };
    let mut script = String::new();
    for act in &record.acts {
        script.push_str(&format!("Act {} ({})\n", act.id, act.place));
        for turn in act.objectives.iter().flat_map(|o| &o.turns) {
            script.push_str(&turn.render());
            script.push('\n');
        }
    }
    Bindings::from([
        ("title".to_string(), record.title.clone()),
        ("descriptions".to_string(), descriptions),
        ("script".to_string(), script.trim_end().to_string()),
    ])
}

fn out_of_range(s: &JudgeScores) -> Vec<(&'static str, i64)> {
    [
        ("logicality", s.logicality),
        ("coherence", s.coherence),
        ("consistency", s.consistency),
    ]
    .into_iter()
    .filter(|(_, v)| !(1..=4).contains(v))
    .collect()
}

fn judge_one(gw: &mut Gateway, record: &PlayRecord) -> Result<(JudgeScores, Vec<String>), LlmError> {
    let request = LlmRequest::new(TemplateId::JudgeStoryline, judge_bindings(record));
    let mut scores = gw.generate(&request, parse_judge)?;
    let mut warnings = Vec::new();
    if !out_of_range(&scores).is_empty() {
        warnings.push(format!("out-of-range scores {:?}, asked again", out_of_range(&scores)));
        scores = gw.generate(&request, parse_judge)?;
        let bad = out_of_range(&scores);
        if !bad.is_empty() {
            warnings.push(format!("out-of-range scores {bad:?} again, clamped to 1-4"));
            scores = JudgeScores {
                logicality: scores.logicality.clamp(1, 4),
                coherence: scores.coherence.clamp(1, 4),
                consistency: scores.consistency.clamp(1, 4),
            };
        }
    }
    for w in &warnings {
        log::warn!("judge: {w}");
    }
    Ok((scores, warnings))
}

/// Score every run on logicality, coherence and character consistency.
/// Runs whose judge call fails are skipped and counted.
pub fn judge_storylines<'a>(
    records: impl IntoIterator<Item = (&'a str, &'a PlayRecord)>,
    backend: Arc<dyn LlmBackend>,
) -> JudgeReport {
    let mut gw = Gateway::new(backend);
    let runs: Vec<RunJudgement> = records
        .into_iter()
        .map(|(run_id, record)| match judge_one(&mut gw, record) {
            Ok((scores, warnings)) => RunJudgement {
                run_id: run_id.to_string(),
                scores: Some(scores),
                warnings,
                error: None,
            },
            Err(e) => RunJudgement {
                run_id: run_id.to_string(),
                scores: None,
                warnings: Vec::new(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let scored: Vec<&JudgeScores> = runs.iter().filter_map(|r| r.scores.as_ref()).collect();
    let n = scored.len() as f64;
    let means = (!scored.is_empty()).then(|| DimensionMeans {
        logicality: scored.iter().map(|s| s.logicality as f64).sum::<f64>() / n,
        coherence: scored.iter().map(|s| s.coherence as f64).sum::<f64>() / n,
        consistency: scored.iter().map(|s| s.consistency as f64).sum::<f64>() / n,
    });
    JudgeReport {
        label: JUDGE_LABEL.into(),
        scored: scored.len(),
        skipped: runs.len() - scored.len(),
        means,
        runs,
    }
}
