use std::sync::Arc;

use dramaturg_batch::judge::judge_bindings;
use dramaturg_batch::{judge_storylines, run_batch, BatchOptions};
use dramaturg_core::llm::parse::JudgeScores;
use dramaturg_core::llm::{BackendSpec, ScriptedBackend, TemplateId};
use dramaturg_core::session::{EngineConfig, PlayRecord};

fn records(n: usize) -> Vec<PlayRecord> {
    let out = run_batch(
        &dramaturg_core::script::demo_script(),
        &EngineConfig::default(),
        &BackendSpec::Demo { completion_chance: 1.0 },
        &BatchOptions {
            n_runs: n,
            ..BatchOptions::default()
        },
    )
    .unwrap();
    out.runs.into_iter().map(|r| r.record).collect()
}

fn named(records: &[PlayRecord]) -> Vec<(String, &PlayRecord)> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("run-{i:03}"), r))
        .collect()
}

#[test]
fn constant_judge_means() {
    let recs = records(3);
    let backend = ScriptedBackend::new().always(
        TemplateId::JudgeStoryline,
        r#"{"logicality": 3, "coherence": 4, "consistency": 3}"#,
    );
    let names = named(&recs);
    let report = judge_storylines(names.iter().map(|(n, r)| (n.as_str(), *r)), Arc::new(backend));
    let m = report.means.unwrap();
    assert_eq!((m.logicality, m.coherence, m.consistency), (3.0, 4.0, 3.0));
    assert_eq!((report.scored, report.skipped), (3, 0));
    assert!(report.label.contains("judge-dependent"));
}

#[test]
fn out_of_range_is_asked_again_then_clamped() {
    let recs = records(2);
    let backend = Arc::new(
        ScriptedBackend::new()
            .on(
                TemplateId::JudgeStoryline,
                r#"{"logicality": 5, "coherence": 4, "consistency": 3}"#,
            )
            .on(
                TemplateId::JudgeStoryline,
                r#"{"logicality": 2, "coherence": 4, "consistency": 3}"#,
            )
            .on(
                TemplateId::JudgeStoryline,
                r#"{"logicality": 5, "coherence": 0, "consistency": 3}"#,
            )
            .on(
                TemplateId::JudgeStoryline,
                r#"{"logicality": 9, "coherence": 0, "consistency": 3}"#,
            ),
    );
    let names = named(&recs);
    let report = judge_storylines(names.iter().map(|(n, r)| (n.as_str(), *r)), backend.clone());
    assert_eq!(backend.calls(TemplateId::JudgeStoryline), 4);
    let first = &report.runs[0];
    assert_eq!(
        first.scores,
        Some(JudgeScores {
            logicality: 2,
            coherence: 4,
            consistency: 3
        })
    );
    assert_eq!(first.warnings.len(), 1);
    let second = &report.runs[1];
    assert_eq!(
        second.scores,
        Some(JudgeScores {
            logicality: 4,
            coherence: 1,
            consistency: 3
        })
    );
    assert_eq!(second.warnings.len(), 2);
    assert!(second.warnings[1].contains("clamped"));
}

#[test]
fn failed_judgement_is_skipped() {
    let recs = records(2);
    let backend = ScriptedBackend::new()
        .on(
            TemplateId::JudgeStoryline,
            r#"{"logicality": 2, "coherence": 2, "consistency": 2}"#,
        )
        .always(TemplateId::JudgeStoryline, "I liked it a lot.");
    let names = named(&recs);
    let report = judge_storylines(names.iter().map(|(n, r)| (n.as_str(), *r)), Arc::new(backend));
    assert_eq!((report.scored, report.skipped), (1, 1));
    assert!(report.runs[1].error.is_some());
    assert_eq!(report.means.unwrap().coherence, 2.0);

    let none = judge_storylines(
        names.iter().map(|(n, r)| (n.as_str(), *r)),
        Arc::new(ScriptedBackend::new().always(TemplateId::JudgeStoryline, "no")),
    );
    assert_eq!(none.means, None);
    assert_eq!(none.skipped, 2);
}

#[test]
fn prompt_carries_the_whole_script() {
    let recs = records(1);
    let b = judge_bindings(&recs[0]);
    assert_eq!(b["title"], recs[0].title);
    assert!(b["descriptions"].contains("Mara Voss: "));
    for (_, turn) in recs[0].dialogue() {
        assert!(b["script"].contains(&turn.render()));
    }
    assert!(b["script"].starts_with("Act 1-1 ("));
}
