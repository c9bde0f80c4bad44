use std::collections::BTreeSet;
use std::sync::Arc;

use dramaturg_core::actor::{ActorConfig, ActorState};
use dramaturg_core::llm::{DemoResponder, Gateway, ScriptedBackend, TemplateId};
use dramaturg_core::retrieval::{CharacterStore, HashedBowEmbedder, MemoryStore, RetrievalConfig};
use dramaturg_core::script::{CharacterKind, CharacterProfile, DialogueTurn, RoleId};
use proptest::prelude::*;

fn actor() -> ActorState {
    let me = RoleId::new("Hedda");
    ActorState::new(
        CharacterProfile {
            role: me.clone(),
            kind: CharacterKind::Actor,
            description: "Hedda.".into(),
        },
        MemoryStore::new(
            me.clone(),
            Arc::new(HashedBowEmbedder::default()),
            RetrievalConfig::default(),
        ),
        CharacterStore::new(me),
        ActorConfig::default(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn rolling_summary_properties(
        speakers in prop::collection::vec(0usize..3, 1..=200),
        gaps in prop::collection::vec(1u64..4, 200),
        seed in any::<u64>(),
    ) {
        let roles = [RoleId::new("Hedda"), RoleId::new("Brack"), RoleId::narration()];
        let mut a = actor();
        let mut gw = Gateway::new(Arc::new(ScriptedBackend::new().with_fallback(DemoResponder::new(seed))));
        let (w, k) = (a.config().summarize_window, a.config().keep_suffix);
        let mut realized: Vec<DialogueTurn> = Vec::new();
        let mut tick = 0;
        let mut points_total = 0;
        let mut heads: Vec<String> = Vec::new();

        for (i, s) in speakers.iter().enumerate() {
            tick += gaps[i];
            let turn = DialogueTurn::new(roles[*s].clone(), format!("utterance {i}"), tick);
            realized.push(turn.clone());
            let before = gw.transcript().len();
            let summary = a.observe(turn, &mut gw).unwrap();
            let log = a.log().turns();

            if let Some(points) = &summary {
                points_total += points.points.len();
                prop_assert!(points.points.iter().all(|p| !p.trim().is_empty()));
                prop_assert_eq!(log.len(), k + 1);
                prop_assert!(log[0].role.is_narration());
                // The summarizer never saw an earlier head.
                let prompt = gw.transcript()[before..]
                    .iter()
                    .find(|e| e.template_id == TemplateId::SummarizeLog)
                    .unwrap()
                    .messages
                    .iter()
                    .map(|m| m.text.as_str())
                    .collect::<String>();
                for h in &heads {
                    let rendered = format!("[{h}]");
                    prop_assert!(!prompt.contains(&rendered));
                }
                heads.push(log[0].utterance.clone());
            }
            prop_assert!(log.len() <= w);
            prop_assert!(log.windows(2).all(|p| p[0].tick < p[1].tick));
            prop_assert_eq!(a.log().summarized_head(), a.summarizations() > 0);

            // The most recent realized turns are kept verbatim.
            let keep = if a.summarizations() > 0 { log.len() - 1 } else { log.len() };
            prop_assert!(keep >= k.min(realized.len()));
            prop_assert_eq!(&log[log.len() - keep..], &realized[realized.len() - keep..]);
        }

        let docs = a.memory().documents();
        prop_assert_eq!(docs.len(), points_total);
        let unique: BTreeSet<(&str, u64)> = docs.iter().map(|d| (d.content.as_str(), d.created_tick)).collect();
        prop_assert_eq!(unique.len(), docs.len());
        // 17th observe is the first summarization
        prop_assert_eq!(a.summarizations() > 0, speakers.len() > w);
    }
}

#[test]
fn monologue_off_skips_the_monologue_call() {
    let me = RoleId::new("Hedda");
    let mut a = ActorState::new(
        CharacterProfile {
            role: me.clone(),
            kind: CharacterKind::Actor,
            description: "Hedda.".into(),
        },
        MemoryStore::new(
            me.clone(),
            Arc::new(HashedBowEmbedder::default()),
            RetrievalConfig::default(),
        ),
        CharacterStore::new(me),
        ActorConfig {
            monologue_enabled: false,
            ..ActorConfig::default()
        },
    )
    .unwrap();
    let backend = Arc::new(ScriptedBackend::new().always(TemplateId::SummarizeLog, "- one\n- two"));
    let mut gw = Gateway::new(backend.clone());
    for i in 1..=17 {
        a.observe(DialogueTurn::new(RoleId::new("Brack"), format!("l{i}"), i), &mut gw)
            .unwrap();
    }
    assert_eq!(backend.calls(TemplateId::Monologue), 0);
    assert!(a.memory().documents().iter().all(|d| d.monologue == d.content));
}
