use std::collections::{BTreeMap, BTreeSet};

use dramaturg_core::director::{DecisionAction, DecisionRecord};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("annotation for {run_id}/{check_event_id} matches no check event")]
    DanglingAnnotation { run_id: String, check_event_id: String },
    #[error("{run_id}/{check_event_id} is annotated twice")]
    DuplicateAnnotation { run_id: String, check_event_id: String },
    #[error("annotation line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// A human verdict on one objective check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckAnnotation {
    pub run_id: String,
    pub check_event_id: String,
    pub human_label: bool,
}

/// One line of a blank annotation sheet. `human_label` is left null for the
/// annotator to fill in with true (completed) or false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetEntry {
    pub run_id: String,
    pub check_event_id: String,
    pub act_id: String,
    pub objective_id: String,
    pub tick: u64,
    pub turns_on_objective: usize,
    pub predicted: bool,
    #[serde(default)]
    pub reason: Option<String>,
    pub human_label: Option<bool>,
}

/// Identifier of a check decision within its run: `<act>@<tick>`.
pub fn check_event_id(decision: &DecisionRecord) -> String {
    format!("{}@{}", decision.act_id, decision.tick)
}

fn checks(decisions: &[DecisionRecord]) -> impl Iterator<Item = &DecisionRecord> {
    decisions.iter().filter(|d| d.action == DecisionAction::Check)
}

pub fn annotation_sheet<'a>(runs: impl IntoIterator<Item = (&'a str, &'a [DecisionRecord])>) -> Vec<SheetEntry> {
    runs.into_iter()
        .flat_map(|(run_id, decisions)| {
            checks(decisions).map(move |d| SheetEntry {
                run_id: run_id.to_string(),
                check_event_id: check_event_id(d),
                act_id: d.act_id.clone(),
                objective_id: d.objective_id.clone(),
                tick: d.tick,
                turns_on_objective: d.turns_on_objective,
                predicted: d.completed == Some(true),
                reason: d.reason.clone(),
                human_label: None,
            })
        })
        .collect()
}

#[derive(Deserialize)]
struct AnnotationLine {
    run_id: String,
    check_event_id: String,
    human_label: Option<bool>,
}

/// Parse line-delimited JSON annotations. Extra fields are ignored, so a
/// filled-in sheet is accepted as is; lines still unlabeled are skipped.
pub fn read_annotations(text: &str) -> Result<Vec<CheckAnnotation>, MetricsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let a: AnnotationLine = serde_json::from_str(line).map_err(|e| MetricsError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(human_label) = a.human_label {
            out.push(CheckAnnotation {
                run_id: a.run_id,
                check_event_id: a.check_event_id,
                human_label,
            });
        }
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

/// Check correctness with "completed" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when precision or recall had a zero denominator and was reported as 0.
    pub degenerate: bool,
    pub confusion: Confusion,
}

impl CorrectnessReport {
    pub fn from_confusion(c: Confusion) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let p = ratio(c.tp, c.tp + c.fp);
        let r = ratio(c.tp, c.tp + c.fn_);
        let (precision, recall) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        CorrectnessReport {
            precision,
            recall,
            f1,
            degenerate: p.is_none() || r.is_none(),
            confusion: c,
        }
    }

    /// Two-decimal summary line.
    pub fn display(&self) -> String {
        format!(
            "precision {:.2}  recall {:.2}  f1 {:.2}{}",
            self.precision,
            self.recall,
            self.f1,
            if self.degenerate { "  (degenerate)" } else { "" }
        )
    }
}

/// Compare each annotated check's verdict with its human label.
pub fn score_checks<'a>(
    runs: impl IntoIterator<Item = (&'a str, &'a [DecisionRecord])>,
    annotations: &[CheckAnnotation],
) -> Result<CorrectnessReport, MetricsError> {
    let mut predicted: BTreeMap<(String, String), bool> = BTreeMap::new();
    for (run_id, decisions) in runs {
        for d in checks(decisions) {
            predicted.insert((run_id.to_string(), check_event_id(d)), d.completed == Some(true));
        }
    }
    let mut seen = BTreeSet::new();
    let mut c = Confusion::default();
    for a in annotations {
        let key = (a.run_id.clone(), a.check_event_id.clone());
        let Some(&pred) = predicted.get(&key) else {
            return Err(MetricsError::DanglingAnnotation {
                run_id: a.run_id.clone(),
                check_event_id: a.check_event_id.clone(),
            });
        };
        if !seen.insert(key) {
            return Err(MetricsError::DuplicateAnnotation {
                run_id: a.run_id.clone(),
                check_event_id: a.check_event_id.clone(),
            });
        }
        match (pred, a.human_label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(CorrectnessReport::from_confusion(c))
}
