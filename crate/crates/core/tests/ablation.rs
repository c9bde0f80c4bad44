mod common;

use common::*;
use dramaturg_core::llm::TemplateId;
use dramaturg_core::session::EngineConfig;

const DIRECTOR_BLOCK: &str = "Instructions from the director";
const SEED_CONTENT: &str = "Hedda hid her father's red pistol in the drawer.";
const SEED_MONOLOGUE: &str = "I keep my father's red pistol in the drawer, where nobody looks.";

fn transcript_text(config: EngineConfig, template: TemplateId) -> Vec<String> {
    let mut s = session(small_setting(), backend(8, NEVER), config);
    s.run_to_end(500).unwrap();
    s.gateway()
        .transcript()
        .iter()
        .filter(|e| e.template_id == template)
        .map(|e| e.messages.iter().map(|m| m.text.clone()).collect::<Vec<_>>().join("\n"))
        .collect()
}

#[test]
fn full_config_uses_director_block() {
    let prompts = transcript_text(EngineConfig::default(), TemplateId::ActorResponse);
    assert!(!prompts.is_empty());
    assert!(prompts.iter().all(|p| p.contains(DIRECTOR_BLOCK)));
    assert!(prompts.iter().any(|p| p.contains(SEED_MONOLOGUE)));
    assert!(prompts.iter().all(|p| !p.contains(SEED_CONTENT)));
}

#[test]
fn no_instruction_has_no_director_block() {
    let config = EngineConfig {
        instruction_enabled: false,
        ..EngineConfig::default()
    };
    let mut s = session(small_setting(), backend(8, NEVER), config);
    s.run_to_end(500).unwrap();
    let t = s.gateway().transcript();
    assert!(t.iter().all(|e| e.template_id != TemplateId::InstructActor));
    assert!(t.iter().all(|e| e.template_id != TemplateId::ActorResponse));
    let actor_prompts: Vec<_> = t
        .iter()
        .filter(|e| e.template_id == TemplateId::ActorResponseUndirected)
        .collect();
    assert!(!actor_prompts.is_empty());
    for e in actor_prompts {
        assert!(e.messages.iter().all(|m| !m.text.contains(DIRECTOR_BLOCK)));
    }
}

#[test]
fn no_monologue_surfaces_content() {
    let config = EngineConfig {
        monologue_enabled: false,
        ..EngineConfig::default()
    };
    let prompts = transcript_text(config.clone(), TemplateId::ActorResponse);
    assert!(prompts.iter().any(|p| p.contains(SEED_CONTENT)));
    assert!(prompts.iter().all(|p| !p.contains(SEED_MONOLOGUE)));
    let outlines = transcript_text(config, TemplateId::WriteOutline);
    assert!(outlines.iter().all(|p| !p.contains("I count the minutes")));
    assert!(outlines.iter().any(|p| p.contains("Hedda finds George dull.")));
}
