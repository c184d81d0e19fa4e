//! Prompts, text-generation backends and plan parsing.

pub mod backend;
pub mod parse;
pub mod template;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use backend::{
    request_plan, BackendConfig, BackendRequest, BackendResponse, Cassette, CassetteMode, FixedBackend,
    HttpBackend, PlanBackend, DEFAULT_MAX_TOKENS,
};
pub use parse::{parse_plan_text, parse_step, render_steps};
pub use template::{build_prompt, PromptMode, PromptTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verb {
    Move,
    Grasp,
    Place,
    Open,
    Close,
    TurnOn,
    TurnOff,
    Slice,
    Pour,
    Wipe,
    Scrub,
    Rinse,
    Wet,
    Dry,
    Tear,
    Press,
    Adjust,
    Watch,
    Other,
}

impl Verb {
    /// Verbs that act on an object the agent must be at or hold.
    pub fn is_interaction(&self) -> bool {
        !matches!(self, Verb::Move | Verb::Place | Verb::Watch | Verb::Other)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("verb serializes");
        f.write_str(s.as_str().unwrap_or("OTHER"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionStep {
    pub index: usize,
    pub verb: Verb,
    pub object_phrases: Vec<String>,
    /// Step text without its "Step n." prefix.
    pub raw: String,
    /// The direct object was introduced with "another", i.e. a second
    /// instance of something already mentioned.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub another_instance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub instruction: String,
    pub steps: Vec<ActionStep>,
    pub raw_text: String,
    pub source: String,
}

impl Plan {
    /// Parses `raw_text` into a plan without a backend round trip.
    pub fn from_text(instruction: &str, raw_text: &str, source: &str) -> crate::Result<Plan> {
        Ok(Plan {
            instruction: instruction.to_string(),
            steps: parse_plan_text(raw_text)?,
            raw_text: raw_text.to_string(),
            source: source.to_string(),
        })
    }
}
