mod common;

use common::*;
use dramaturg_core::session::{replay, EngineConfig, PlayRecord, SessionError, SessionStatus};

#[test]
fn finished_demo_record_has_seven_acts() {
    let mut s = demo_session(11, EngineConfig::default());
    s.run_to_end(2_000).unwrap();
    assert_eq!(s.status(), SessionStatus::Finished);
    let record = s.export_play();
    assert_eq!(record.acts.len(), 7);
    assert!(record.finished);
    assert!(record.acts.iter().all(|a| a.complete));
    let objectives: usize = record.acts.iter().map(|a| a.objectives.len()).sum();
    assert_eq!(objectives, s.setting().objective_count());
}

#[test]
fn record_turns_match_dialogue_events() {
    let mut s = demo_session(12, EngineConfig::default());
    s.run_to_end(60).unwrap();
    let act = s.act_runs().find(|r| !r.is_complete()).unwrap().act().id.clone();
    s.player_speak(&act, "Excuse me!").unwrap();
    s.run_to_end(40).unwrap();
    let record = s.export_play();
    let dialogue_events = s.events().iter().filter(|e| e.kind.is_dialogue()).count();
    assert_eq!(record.turn_count(), dialogue_events);
    let ticks: Vec<u64> = record.dialogue().iter().map(|(_, t)| t.tick).collect();
    assert!(ticks.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn replay_reproduces_the_play() {
    let mut s = session(small_setting(), backend(4, NEVER), EngineConfig::default());
    s.run_to_end(3).unwrap();
    s.player_speak("1-2", "Is the tea ready?").unwrap();
    s.run_to_end(6).unwrap();
    s.enter_act("1-1").unwrap();
    s.run_to_end(500).unwrap();
    let record = s.export_play();
    assert!(!record.player_inputs.is_empty());

    let again = replay(&record).unwrap();
    let replayed = again.export_play();
    assert_eq!(replayed.digest(), record.digest());
    assert_eq!(again.events(), s.events());
}

#[test]
fn replay_of_partial_run() {
    let mut s = demo_session(5, EngineConfig::default());
    s.run_to_end(25).unwrap();
    let record = s.export_play();
    let again = replay(&record).unwrap();
    assert_eq!(again.export_play(), record);
}

#[test]
fn json_round_trip_and_version_check() {
    let mut s = session(small_setting(), backend(4, DONE), EngineConfig::default());
    s.run_to_end(500).unwrap();
    let record = s.export_play();
    let back = PlayRecord::from_json(&record.to_json()).unwrap();
    assert_eq!(back, record);
    assert!(replay(&back).is_ok());

    let mut wrong = record.clone();
    wrong.version = 99;
    assert!(matches!(
        PlayRecord::from_json(&wrong.to_json()),
        Err(SessionError::Record(_))
    ));
}

#[test]
fn replay_detects_divergence() {
    let mut s = session(small_setting(), backend(4, NEVER), EngineConfig::default());
    s.run_to_end(10).unwrap();
    let mut record = s.export_play();
    record.config.monologue_enabled = false;
    // A different config renders different prompts, so the transcript no
    // longer matches somewhere along the way.
    record.config.instruction_enabled = false;
    assert!(replay(&record).is_err());
}
