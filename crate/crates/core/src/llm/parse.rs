//! Structured-output extraction from raw model text.
//!
//! Every parser first tries the text as-is, then makes one repair pass:
//! strip code fences and surrounding prose, cut out the first balanced
//! `{...}` object and drop trailing commas.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::script::{PlannedTurn, RoleId};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed model output: {0}")]
    MalformedOutput(String),
    #[error("script contained no usable lines")]
    EmptyScript,
}

fn malformed(msg: impl Into<String>) -> ParseError {
    ParseError::MalformedOutput(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutlineResult {
    pub previous_outline: String,
    pub new_outline: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptResult {
    pub turns: Vec<PlannedTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub completed: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionText {
    pub synopsis: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub logicality: i64,
    pub coherence: i64,
    pub consistency: i64,
}

/// Remove a surrounding markdown code fence, if any, keeping its body.
fn strip_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let body = &text[open + 3..];
    // Skip a language tag on the fence line ("```json").
    let body = match body.find(['\n', '{', '[']) {
        Some(i)
            if body[..i]
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c.is_whitespace()) =>
        {
            &body[i..]
        }
        _ => body,
    };
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// The first balanced `{...}` span, honouring string literals.
fn first_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

fn drop_trailing_commas(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_str = false;
    let mut escaped = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_str = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Parse the first JSON object in `text`, with one repair pass.
pub fn extract_object(text: &str) -> Result<serde_json::Map<String, Value>, ParseError> {
    if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(text.trim()) {
        return Ok(map);
    }
    let body = strip_fences(text);
    let obj = first_object(body).ok_or_else(|| malformed("no JSON object found"))?;
    match serde_json::from_str::<Value>(&drop_trailing_commas(obj)) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(malformed("expected a JSON object")),
        Err(e) => Err(malformed(e.to_string())),
    }
}

fn string_field(map: &serde_json::Map<String, Value>, key: &str) -> Option<String> {
    match map.get(key)? {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Null => None,
        other => Some(other.to_string()),
    }
}

pub fn parse_outline(text: &str) -> Result<OutlineResult, ParseError> {
    let map = extract_object(text)?;
    let new_outline = string_field(&map, "new_outline")
        .filter(|s| !s.is_empty())
        .ok_or_else(|| malformed("missing `new_outline`"))?;
    Ok(OutlineResult {
        previous_outline: string_field(&map, "previous_outline").unwrap_or_default(),
        new_outline,
    })
}

/// Resolve a speaker name written by the model to one of `allowed`:
/// exact, case-insensitive, or by given name ("HEDDA" for "Hedda Gai").
pub fn resolve_role(name: &str, allowed: &[RoleId]) -> Option<RoleId> {
    let name = name.trim().trim_matches(|c| c == '*' || c == '"').trim();
    if name.is_empty() {
        return None;
    }
    if let Some(r) = allowed.iter().find(|r| r.as_str() == name) {
        return Some(r.clone());
    }
    if let Some(r) = allowed.iter().find(|r| r.as_str().eq_ignore_ascii_case(name)) {
        return Some(r.clone());
    }
    let mut by_given = allowed.iter().filter(|r| r.given_name().eq_ignore_ascii_case(name));
    match (by_given.next(), by_given.next()) {
        (Some(r), None) => Some(r.clone()),
        _ => None,
    }
}

/// Planned turns whose speaker resolves into `allowed`, at most `line_budget`.
pub fn parse_script(text: &str, line_budget: usize, allowed: &[RoleId]) -> Result<ScriptResult, ParseError> {
    let map = extract_object(text)?;
    let lines = match map.get("scripts").or_else(|| map.get("script")) {
        Some(Value::Array(lines)) => lines,
        _ => return Err(malformed("missing `scripts` array")),
    };
    let turns: Vec<PlannedTurn> = lines
        .iter()
        .filter_map(|line| {
            let obj = line.as_object()?;
            let role = resolve_role(&string_field(obj, "role")?, allowed)?;
            let content = string_field(obj, "content").filter(|c| !c.is_empty())?;
            Some(PlannedTurn {
                role,
                expected_utterance: content,
            })
        })
        .take(line_budget)
        .collect();
    if turns.is_empty() {
        return Err(ParseError::EmptyScript);
    }
    Ok(ScriptResult { turns })
}

pub fn parse_check(text: &str) -> Result<CheckResult, ParseError> {
    let map = extract_object(text)?;
    let completed = match map.get("completed") {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("true") => true,
        Some(Value::String(s)) if s.eq_ignore_ascii_case("false") => false,
        _ => return Err(malformed("missing boolean `completed`")),
    };
    Ok(CheckResult {
        completed,
        reason: string_field(&map, "reason").unwrap_or_default(),
    })
}

/// Text after a `label:` prefix, tolerating markdown emphasis around the label.
fn labeled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let t = line.trim().trim_start_matches(['*', '#', '-', ' ']);
    if t.len() < label.len() || !t[..label.len()].eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = t[label.len()..].trim_start_matches('*');
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches('*').trim())
}

/// `Synopsis:` / `Keywords:` labeled lines.
pub fn parse_instruction(text: &str) -> Result<InstructionText, ParseError> {
    let mut synopsis = None;
    let mut keywords = None;
    for line in text.lines() {
        if synopsis.is_none() {
            if let Some(s) = labeled(line, "synopsis") {
                synopsis = Some(s.to_string());
                continue;
            }
        }
        if keywords.is_none() {
            if let Some(k) = labeled(line, "keywords") {
                keywords = Some(
                    k.split([',', ';', '、'])
                        .map(|w| w.trim().trim_matches(['"', '.', '*']).trim().to_string())
                        .filter(|w| !w.is_empty())
                        .collect::<Vec<_>>(),
                );
            }
        }
    }
    let synopsis = synopsis
        .filter(|s| !s.is_empty())
        .ok_or_else(|| malformed("missing `Synopsis:` line"))?;
    Ok(InstructionText {
        synopsis,
        keywords: keywords.unwrap_or_default(),
    })
}

/// Summary points, one per bulleted or numbered line.
pub fn parse_points(text: &str) -> Result<Vec<String>, ParseError> {
    let strip = |line: &str| -> String {
        let t = line.trim();
        let t = t.trim_start_matches(['-', '*', '•']);
        let digits = t.chars().take_while(|c| c.is_ascii_digit()).count();
        let t = if digits > 0 && t[digits..].starts_with(['.', ')']) {
            &t[digits + 1..]
        } else {
            t
        };
        t.trim().to_string()
    };
    let points: Vec<String> = text.lines().map(strip).filter(|p| !p.is_empty()).collect();
    if points.is_empty() {
        return Err(malformed("no summary points"));
    }
    Ok(points)
}

pub fn parse_judge(text: &str) -> Result<JudgeScores, ParseError> {
    let map = extract_object(text)?;
    let get = |k: &str| -> Result<i64, ParseError> {
        match map.get(k) {
            Some(Value::Number(n)) => n
                .as_i64()
                .or_else(|| n.as_f64().map(|f| f.round() as i64))
                .ok_or_else(|| malformed(format!("`{k}` is not an integer"))),
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map_err(|_| malformed(format!("`{k}` is not an integer"))),
            _ => Err(malformed(format!("missing `{k}`"))),
        }
    };
    Ok(JudgeScores {
        logicality: get("logicality")?,
        coherence: get("coherence")?,
        consistency: get("consistency")?,
    })
}
