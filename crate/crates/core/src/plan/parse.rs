//! Step grammar.
//!
//! A plan is the set of lines of the form `Step <n>.` or `Step <n>:`
//! (case-insensitive, leading whitespace allowed); other lines are ignored.
//! Inside a step the first word (or a two-word form such as "turn on") is
//! the verb, and the remainder is split into object phrases at
//! prepositions and "and". Determiners, quantifiers ("piece of") and
//! adverbial particles are stripped; "it"/"them" refer back to the most
//! recent object phrase of the plan.

use crate::error::{Error, Result};
use crate::plan::{ActionStep, Verb};
use crate::scene::normalize_name;

const SEPARATORS: &[&str] = &["to", "on", "in", "into", "onto", "from", "with", "at", "and"];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "another", "its", "his", "her", "their", "your", "my", "some", "two", "three",
    "both", "each", "all", "one",
];

const PARTICLES: &[&str] = &[
    "back", "closer", "up", "down", "away", "out", "off", "over", "again", "together", "there", "here",
    "nearby", "gently", "carefully", "properly", "thoroughly",
];

const QUANTIFIERS: &[&str] = &["piece", "pieces", "slice", "slices", "bit", "bits"];

const PRONOUNS: &[&str] = &["it", "them"];

/// Head nouns that name a location or setting rather than an object.
const NON_OBJECT_HEADS: &[&str] = &["place", "level", "position", "spot", "side", "way", "location", "direction"];

fn single_verb(word: &str) -> Option<Verb> {
    Some(match word {
        "move" | "go" | "walk" | "navigate" | "approach" | "head" => Verb::Move,
        "grasp" | "grab" | "pick" | "take" | "get" | "hold" | "fetch" | "retrieve" => Verb::Grasp,
        "place" | "put" | "set" | "drop" | "return" | "lay" | "hang" => Verb::Place,
        "open" => Verb::Open,
        "close" | "shut" => Verb::Close,
        "slice" | "cut" | "chop" | "dice" => Verb::Slice,
        "pour" | "fill" => Verb::Pour,
        "wipe" | "clean" => Verb::Wipe,
        "scrub" => Verb::Scrub,
        "rinse" | "wash" => Verb::Rinse,
        "wet" => Verb::Wet,
        "dry" => Verb::Dry,
        "tear" => Verb::Tear,
        "press" | "push" => Verb::Press,
        "adjust" => Verb::Adjust,
        "watch" => Verb::Watch,
        _ => return None,
    })
}

/// Verb form starting at `tokens[i]`: the verb and how many tokens it spans.
fn verb_at(tokens: &[String], i: usize) -> Option<(Verb, usize)> {
    let first = tokens.get(i)?.as_str();
    let second = tokens.get(i + 1).map(String::as_str);
    let two = match (first, second) {
        ("turn" | "switch", Some("on")) => Some(Verb::TurnOn),
        ("turn" | "switch", Some("off")) => Some(Verb::TurnOff),
        ("pick", Some("up")) => Some(Verb::Grasp),
        ("put", Some("down")) => Some(Verb::Place),
        _ => None,
    };
    if let Some(v) = two {
        return Some((v, 2));
    }
    single_verb(first).map(|v| (v, 1))
}

fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric() && c != '_' && c != '-')
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Strips determiners, particles and quantifiers from a token segment.
/// Returns the cleaned words and whether "another" was among them.
fn clean_segment(mut words: &[String]) -> (Vec<String>, bool) {
    let mut another = false;
    loop {
        let before = words.len();
        while let Some(w) = words.first() {
            if DETERMINERS.contains(&w.as_str()) || PARTICLES.contains(&w.as_str()) {
                another |= w == "another";
                words = &words[1..];
            } else {
                break;
            }
        }
        while let Some(w) = words.last() {
            if PARTICLES.contains(&w.as_str()) {
                words = &words[..words.len() - 1];
            } else {
                break;
            }
        }
        if words.len() >= 3 && QUANTIFIERS.contains(&words[0].as_str()) && words[1] == "of" {
            words = &words[2..];
        }
        if words.len() == before {
            break;
        }
    }
    (words.to_vec(), another)
}

/// Parses a step body with the running pronoun context of its plan.
fn parse_step_in_context(line: &str, last_phrase: &mut Option<String>) -> ActionStep {
    let raw = line.trim().to_string();
    let tokens = tokenize(&raw);
    let (mut verb, mut start) = match verb_at(&tokens, 0) {
        Some((v, n)) => (v, n),
        None => (Verb::Other, tokens.len().min(1)),
    };
    // "turn the tv on"
    if matches!(tokens.first().map(String::as_str), Some("turn" | "switch")) && start == 1 {
        match tokens.last().map(String::as_str) {
            Some("on") => verb = Verb::TurnOn,
            Some("off") => verb = Verb::TurnOff,
            _ => {}
        }
    }

    let mut segments: Vec<Vec<String>> = vec![Vec::new()];
    let mut at_clause_start = false;
    while start < tokens.len() {
        if at_clause_start {
            at_clause_start = false;
            if let Some((_, n)) = verb_at(&tokens, start) {
                start += n;
                continue;
            }
        }
        let tok = &tokens[start];
        if SEPARATORS.contains(&tok.as_str()) {
            segments.push(Vec::new());
            at_clause_start = true;
        } else {
            segments.last_mut().expect("non-empty").push(tok.clone());
        }
        start += 1;
    }

    let mut phrases: Vec<String> = Vec::new();
    let mut another_instance = false;
    for (i, seg) in segments.iter().enumerate() {
        let (words, another) = clean_segment(seg);
        if words.is_empty() {
            continue;
        }
        let phrase = normalize_name(&words.join(" "));
        let resolved = if words.len() == 1 && PRONOUNS.contains(&words[0].as_str()) {
            match last_phrase.clone() {
                Some(p) => p,
                None => continue,
            }
        } else if NON_OBJECT_HEADS.contains(&words[words.len() - 1].as_str()) {
            continue;
        } else {
            *last_phrase = Some(phrase.clone());
            phrase
        };
        if phrases.is_empty() && i == 0 {
            another_instance = another;
        }
        if !phrases.contains(&resolved) {
            phrases.push(resolved);
        }
    }

    ActionStep {
        index: 0,
        verb,
        object_phrases: phrases,
        raw,
        another_instance,
    }
}

/// Parses one step body (prefix already removed). Pronouns without an
/// antecedent in the same line are dropped.
pub fn parse_step(line: &str) -> ActionStep {
    parse_step_in_context(line, &mut None)
}

/// Body of a `Step <n>.` / `Step <n>:` line, if the line is one.
fn step_body(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let head = t.get(..4)?;
    if !head.eq_ignore_ascii_case("step") {
        return None;
    }
    let rest = t[4..].trim_start();
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let rest = rest[digits..].trim_start();
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(':'))?;
    Some(rest.trim())
}

pub fn parse_plan_text(text: &str) -> Result<Vec<ActionStep>> {
    let mut last_phrase = None;
    let steps: Vec<ActionStep> = text
        .lines()
        .filter_map(step_body)
        .enumerate()
        .map(|(i, body)| {
            let mut s = parse_step_in_context(body, &mut last_phrase);
            s.index = i + 1;
            s
        })
        .collect();
    if steps.is_empty() {
        return Err(Error::PlanParse { raw: text.to_string() });
    }
    Ok(steps)
}

/// Canonical `Step n. <text>` rendering.
pub fn render_steps(steps: &[ActionStep]) -> String {
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Step {}. {}", i + 1, s.raw))
        .collect::<Vec<_>>()
        .join("\n")
}
