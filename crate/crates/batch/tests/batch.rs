use dramaturg_batch::{ablate, ablation_configs, run_batch, BatchError, BatchOptions, RunStats};
use dramaturg_core::llm::BackendSpec;
use dramaturg_core::script::demo_script;
use dramaturg_core::session::{Completion, EngineConfig};

fn demo(p: f64) -> BackendSpec {
    BackendSpec::Demo { completion_chance: p }
}

fn options(n_runs: usize) -> BatchOptions {
    BatchOptions {
        n_runs,
        ..BatchOptions::default()
    }
}

#[test]
fn completing_at_five() {
    let setting = demo_script();
    let out = run_batch(&setting, &EngineConfig::default(), &demo(1.0), &options(10)).unwrap();
    let s = &out.stats;
    assert_eq!((s.runs, s.failed_runs), (10, 0));
    assert_eq!(s.turns_per_objective, 5.0);
    assert_eq!(s.force_completions, 0);
    assert_eq!(s.objectives_completed, 10 * setting.objective_count());
    assert_eq!(s.check_count, s.objectives_completed);
    assert_eq!(s.total_turns, 5 * s.objectives_completed);
    assert!(s
        .per_objective
        .iter()
        .all(|o| o.completions == 10 && o.turns_per_objective == 5.0));
    assert_eq!(RunStats::recount(out.runs.iter().map(|r| &r.record)), out.stats);
}

#[test]
fn never_completing_forces_at_nine() {
    let setting = demo_script();
    let out = run_batch(&setting, &EngineConfig::default(), &demo(0.0), &options(3)).unwrap();
    let s = &out.stats;
    assert_eq!(s.turns_per_objective, 9.0);
    assert_eq!(s.force_completions, 3 * setting.objective_count());
    assert_eq!(s.check_count, 4 * s.force_completions);
    for r in &out.runs {
        let objectives = r.record.acts.iter().flat_map(|a| &a.objectives);
        assert!(objectives
            .clone()
            .all(|o| o.completion == Some(Completion::Forced) && o.turns.len() == 9));
    }
    assert_eq!(RunStats::recount(out.runs.iter().map(|r| &r.record)), out.stats);
}

#[test]
fn recount_agrees_on_mixed_runs() {
    let out = run_batch(&demo_script(), &EngineConfig::default(), &demo(0.5), &options(6)).unwrap();
    assert!(out.stats.force_completions > 0);
    assert!(out.stats.turns_per_objective > 5.0 && out.stats.turns_per_objective < 9.0);
    assert_eq!(RunStats::recount(out.runs.iter().map(|r| &r.record)), out.stats);
}

#[test]
fn parallel_workers_match_sequential() {
    let setting = demo_script();
    let config = EngineConfig::default();
    let seq = run_batch(&setting, &config, &demo(0.5), &options(4)).unwrap();
    let par = run_batch(
        &setting,
        &config,
        &demo(0.5),
        &BatchOptions {
            workers: 3,
            ..options(4)
        },
    )
    .unwrap();
    assert_eq!(seq, par);
    let ids: Vec<&str> = par.runs.iter().map(|r| r.run_id.as_str()).collect();
    assert_eq!(ids, ["run-000", "run-001", "run-002", "run-003"]);
    assert_ne!(par.runs[0].record, par.runs[1].record);
}

#[test]
fn failed_runs_are_kept_and_counted() {
    let config = EngineConfig {
        call_cap: Some(40),
        ..EngineConfig::default()
    };
    let out = run_batch(&demo_script(), &config, &demo(1.0), &options(2)).unwrap();
    assert!(out.runs.iter().all(|r| !r.succeeded()));
    assert!(out.runs[0].error.as_deref().unwrap().contains("budget"));
    assert!(!out.runs[0].record.transcript.is_empty());
    assert_eq!(
        (out.stats.runs, out.stats.failed_runs, out.stats.objectives_completed),
        (2, 2, 0)
    );

    let unfinished = run_batch(
        &demo_script(),
        &EngineConfig::default(),
        &demo(1.0),
        &BatchOptions {
            max_ticks: 10,
            ..options(1)
        },
    )
    .unwrap();
    assert!(unfinished.runs[0].error.as_deref().unwrap().contains("did not finish"));
}

#[test]
fn preconditions() {
    assert!(matches!(
        run_batch(&demo_script(), &EngineConfig::default(), &demo(1.0), &options(0)),
        Err(BatchError::NoRuns)
    ));
    let bad = EngineConfig {
        check_start: 10,
        ..EngineConfig::default()
    };
    assert!(matches!(
        run_batch(&demo_script(), &bad, &demo(1.0), &options(1)),
        Err(BatchError::Session(_))
    ));
}

#[test]
fn ablation_groups() {
    let base = EngineConfig::default();
    let names: Vec<&str> = ablation_configs(&base).iter().map(|(n, _)| *n).collect();
    assert_eq!(names, ["full", "no-instruction", "no-monologue"]);
    let (report, runs) = ablate(&demo_script(), &base, &demo(0.5), &options(2), Some(&demo(0.5))).unwrap();
    assert_eq!(report.groups.len(), 3);
    assert!(!report.groups[1].config.instruction_enabled && report.groups[1].config.monologue_enabled);
    assert!(report.groups[2].config.instruction_enabled && !report.groups[2].config.monologue_enabled);
    for (g, (name, group_runs)) in report.groups.iter().zip(&runs) {
        assert_eq!(&g.name, name);
        assert_eq!(group_runs.len(), 2);
        assert_eq!(g.judge.as_ref().unwrap().scored, 2);
    }
}
