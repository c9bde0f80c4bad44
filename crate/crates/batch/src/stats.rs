use std::collections::{BTreeMap, BTreeSet};

use dramaturg_core::director::DecisionAction;
use dramaturg_core::llm::TemplateId;
use dramaturg_core::session::{Completion, PlayRecord};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveStats {
    pub act_id: String,
    pub objective_id: String,
    /// Runs in which the objective was completed.
    pub completions: usize,
    pub checks: usize,
    pub force_completions: usize,
    pub turns_per_objective: f64,
}

/// Objective-completion statistics over finished runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runs: usize,
    pub failed_runs: usize,
    pub objectives_completed: usize,
    /// Turns realized under completed objectives.
    pub total_turns: usize,
    pub check_count: usize,
    pub force_completions: usize,
    pub turns_per_objective: f64,
    pub per_objective: Vec<ObjectiveStats>,
}

#[derive(Default)]
struct Tally {
    completions: usize,
    turns: usize,
    checks: usize,
    forced: usize,
}

impl RunStats {
    /// Aggregate from the directors' decision logs.
    pub fn from_decisions<'a>(records: impl IntoIterator<Item = &'a PlayRecord>) -> Self {
        let (mut runs, mut failed) = (0, 0);
        let mut tallies: BTreeMap<(String, String), Tally> = BTreeMap::new();
        for record in records {
            runs += 1;
            if !record.finished {
                failed += 1;
                continue;
            }
            for d in &record.decisions {
                if !matches!(d.action, DecisionAction::Check | DecisionAction::Force) {
                    continue;
                }
                let t = tallies.entry((d.act_id.clone(), d.objective_id.clone())).or_default();
                match d.action {
                    DecisionAction::Check => {
                        t.checks += 1;
                        if d.completed == Some(true) {
                            t.completions += 1;
                            t.turns += d.turns_on_objective;
                        }
                    }
                    DecisionAction::Force => {
                        t.forced += 1;
                        t.completions += 1;
                        t.turns += d.turns_on_objective;
                    }
                    _ => unreachable!("filtered above"),
                }
            }
        }
        Self::assemble(tallies, runs, failed)
    }

    /// Aggregate again from the exported acts and the model transcript,
    /// without reading decisions. A check is any tick with an objective-check
    /// call, attributed to the objective that owns that tick's turn.
    pub fn recount<'a>(records: impl IntoIterator<Item = &'a PlayRecord>) -> Self {
        let (mut runs, mut failed) = (0, 0);
        let mut tallies: BTreeMap<(String, String), Tally> = BTreeMap::new();
        for record in records {
            runs += 1;
            if !record.finished {
                failed += 1;
                continue;
            }
            let mut owner: BTreeMap<u64, (String, String)> = BTreeMap::new();
            for act in &record.acts {
                for o in &act.objectives {
                    let key = (act.id.clone(), o.id.clone());
                    let t = tallies.entry(key.clone()).or_default();
                    if let Some(c) = o.completion {
                        t.completions += 1;
                        t.turns += o.turns.len();
                        if c == Completion::Forced {
                            t.forced += 1;
                        }
                    }
                    for turn in &o.turns {
                        owner.insert(turn.tick, key.clone());
                    }
                }
            }
            let check_ticks: BTreeSet<u64> = record
                .transcript
                .iter()
                .filter(|e| e.template_id == TemplateId::CheckObjective)
                .map(|e| e.tick)
                .collect();
            for tick in check_ticks {
                if let Some(key) = owner.get(&tick) {
                    tallies.entry(key.clone()).or_default().checks += 1;
                }
            }
        }
        // Objectives never decided on do not appear in decision logs.
        tallies.retain(|_, t| t.completions + t.checks + t.forced > 0);
        Self::assemble(tallies, runs, failed)
    }

    fn assemble(tallies: BTreeMap<(String, String), Tally>, runs: usize, failed: usize) -> Self {
        let total_turns = tallies.values().map(|t| t.turns).sum();
        let per_objective: Vec<ObjectiveStats> = tallies
            .into_iter()
            .map(|((act_id, objective_id), t)| ObjectiveStats {
                act_id,
                objective_id,
                completions: t.completions,
                checks: t.checks,
                force_completions: t.forced,
                turns_per_objective: mean(t.turns, t.completions),
            })
            .collect();
        let completed: usize = per_objective.iter().map(|o| o.completions).sum();
        RunStats {
            runs,
            failed_runs: failed,
            objectives_completed: completed,
            total_turns,
            check_count: per_objective.iter().map(|o| o.checks).sum(),
            force_completions: per_objective.iter().map(|o| o.force_completions).sum(),
            turns_per_objective: mean(total_turns, completed),
            per_objective,
        }
    }
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}
