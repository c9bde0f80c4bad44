//! An offline stand-in for a chat model.
//!
//! Responses are synthesized from the request bindings with an RNG seeded
//! from the configured seed and a hash of the rendered prompt, so a given
//! prompt always yields the same text and no state is carried between
//! calls. Good enough to drive full plays in tests and demos; it does not
//! try to write good drama.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::backend::{BackendError, LlmBackend, LlmCall};
use super::template::TemplateId;
use crate::script::NARRATION;
use crate::util::fnv1a64;

#[derive(Debug, Clone)]
pub struct DemoResponder {
    seed: u64,
    completion_chance: f64,
}

impl DemoResponder {
    pub fn new(seed: u64) -> Self {
        DemoResponder {
            seed,
            completion_chance: 0.5,
        }
    }

    /// Probability that an objective check reports completion.
    pub fn with_completion_chance(mut self, p: f64) -> Self {
        self.completion_chance = p.clamp(0.0, 1.0);
        self
    }

    fn rng_for(&self, call: &LlmCall<'_>) -> ChaCha8Rng {
        let mut h = fnv1a64(call.template_id.as_str().as_bytes());
        for m in call.messages {
            h ^= fnv1a64(m.text.as_bytes()).rotate_left(17);
            h = h.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }
}

const OPENERS: &[&str] = &[
    "Listen,",
    "Honestly,",
    "Well,",
    "You know,",
    "Forgive me, but",
    "I must say,",
    "Look,",
    "Tell me,",
    "Strange,",
    "I wonder",
    "Of course,",
    "Perhaps",
    "Frankly,",
    "Let us be clear,",
    "I keep thinking",
    "Do you remember",
];

const MIDDLES: &[&str] = &[
    "this is about",
    "we cannot ignore",
    "nobody has mentioned",
    "everyone is asking about",
    "I have been thinking about",
    "it all comes back to",
    "there is more to",
    "we should talk about",
    "I did not expect",
    "I refuse to pretend about",
    "someone has to face",
    "the whole town knows about",
    "it is time to settle",
    "I am not ready for",
];

const CLOSERS: &[&str] = &[
    "and you know it.",
    "before it is too late.",
    "whatever they say.",
    "if we are honest.",
    "right now.",
    "tonight of all nights.",
    "and I will not apologise.",
    "for both our sakes.",
    "and that frightens me.",
    "so hear me out.",
    "once and for all.",
    "and then we move on.",
    "more than ever.",
    "if you will allow me.",
];

const STYLE: &[&str] = &[
    "guarded", "warm", "sharp", "hesitant", "urgent", "ironic", "wistful", "composed", "defiant", "curious", "anxious",
    "polite", "cold", "playful",
];

const STOPWORDS: &[&str] = &[
    "about", "after", "again", "their", "there", "these", "those", "which", "while", "would", "could", "should",
    "other", "being", "before", "began", "where", "whether", "until", "into", "with", "from", "that", "this", "they",
    "them", "then", "when", "what", "were", "have",
];

/// Content words of `text`, in order of first appearance.
fn topic_words(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in text.split(|c: char| !c.is_alphanumeric() && c != '\'') {
        let lw = w.to_lowercase();
        if lw.len() > 4 && !STOPWORDS.contains(&lw.as_str()) && !out.contains(&lw) {
            out.push(lw);
        }
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String], fallback: &'a str) -> &'a str {
    words.choose(rng).map(String::as_str).unwrap_or(fallback)
}

fn names(list: &str) -> Vec<String> {
    list.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn line(rng: &mut ChaCha8Rng, topics: &[String]) -> String {
    let topic = pick(rng, topics, "all of this");
    format!(
        "{} {} {} {}",
        OPENERS.choose(rng).unwrap(),
        MIDDLES.choose(rng).unwrap(),
        topic,
        CLOSERS.choose(rng).unwrap()
    )
}

fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace().take(n).collect::<Vec<_>>().join(" ")
}

impl LlmBackend for DemoResponder {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError> {
        let mut rng = self.rng_for(call);
        let get = |k: &str| call.bindings.get(k).map(String::as_str).unwrap_or("");
        let out = match call.template_id {
            TemplateId::WriteOutline => {
                let goal = get("act_goal");
                let history = get("dialogue_history");
                let previous = if history.starts_with('(') {
                    "Nothing has happened yet.".to_string()
                } else {
                    format!("So far: {} ...", first_words(history, 12))
                };
                let chars = names(get("characters"));
                let who = chars.choose(&mut rng).cloned().unwrap_or_default();
                json!({
                    "previous_outline": previous,
                    "new_outline": format!(
                        "{goal} {who} takes the lead while the others respond in a {} manner.",
                        STYLE.choose(&mut rng).unwrap()
                    ),
                })
                .to_string()
            }
            TemplateId::TranslateScript => {
                let chars = names(get("characters"));
                let n: usize = get("num_lines").parse().unwrap_or(5);
                let topics = topic_words(get("act_outline"));
                let lines: Vec<_> = (0..n)
                    .map(|_| {
                        let narration = chars.is_empty() || rng.random_bool(0.15);
                        if narration {
                            let t = pick(&mut rng, &topics, "the room");
                            json!({"role": NARRATION, "content": format!("A pause; attention turns to {t}.")})
                        } else {
                            let who = chars.choose(&mut rng).unwrap().clone();
                            json!({"role": who, "content": line(&mut rng, &topics)})
                        }
                    })
                    .collect();
                json!({ "scripts": lines }).to_string()
            }
            TemplateId::InstructActor => {
                let actor = get("actor_name");
                let topics = topic_words(get("content"));
                let t1 = pick(&mut rng, &topics, "the moment").to_string();
                let t2 = pick(&mut rng, &topics, "the others").to_string();
                let kws: Vec<&str> = STYLE.choose_multiple(&mut rng, 3).copied().collect();
                format!(
                    "Synopsis: {actor} responds to the moment, touching on {t1} and {t2}.\nKeywords: {}, {t1}",
                    kws.join(", ")
                )
            }
            TemplateId::ActorResponse | TemplateId::ActorResponseUndirected => {
                let mut source = get("instruction").to_string();
                source.push(' ');
                source.push_str(get("relevant_memories"));
                let topics = topic_words(&source);
                line(&mut rng, &topics)
            }
            TemplateId::CheckObjective => {
                let completed = rng.random_bool(self.completion_chance);
                json!({
                    "completed": completed,
                    "reason": if completed { "The script has reached the objective." } else { "The objective has not been reached yet." },
                })
                .to_string()
            }
            TemplateId::SummarizeLog => {
                let points: Vec<String> = get("dialogue_history")
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .step_by(3)
                    .take(4)
                    .map(|l| format!("- {}", first_words(l, 14)))
                    .collect();
                if points.is_empty() {
                    "- Nothing of note happened.".to_string()
                } else {
                    points.join("\n")
                }
            }
            TemplateId::Monologue => {
                let content = get("content");
                format!("I remember this clearly: {content}")
            }
            TemplateId::Interview => {
                let topics = topic_words(get("relevant_memories"));
                format!(
                    "Speaking as {}, I keep coming back to {}.",
                    get("name"),
                    pick(&mut rng, &topics, "what happened here")
                )
            }
            TemplateId::JudgeStoryline => json!({
                "logicality": rng.random_range(2..=4),
                "coherence": rng.random_range(2..=4),
                "consistency": rng.random_range(2..=4),
            })
            .to_string(),
        };
        Ok(out)
    }
}
