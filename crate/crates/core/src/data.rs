//! Bundled vocabularies, templates and instruction sets, each overridable
//! from a file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{normalize_name, RoomType};

pub const CATALOG_JSON: &str = include_str!("../data/catalog.json");
pub const DISTRACTORS_TXT: &str = include_str!("../data/distractors.txt");
pub const SYNONYMS_TXT: &str = include_str!("../data/synonyms.txt");
pub const INSTRUCTIONS_JSON: &str = include_str!("../data/instructions.json");
pub const INFERENCE_TEMPLATE: &str = include_str!("../data/templates/inference.txt");
pub const GENERATION_TEMPLATE: &str = include_str!("../data/templates/generation.txt");

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Object classes that plausibly occur in each room type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog(BTreeMap<RoomType, Vec<String>>);

impl Catalog {
    pub fn bundled() -> Self {
        Self::from_json(CATALOG_JSON).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<RoomType, Vec<String>> =
            serde_json::from_str(text).map_err(|e| Error::parse("catalog", e))?;
        let map = raw
            .into_iter()
            .map(|(room, names)| {
                let mut names: Vec<String> = names.iter().map(|n| normalize_name(n)).collect();
                names.retain(|n| !n.is_empty());
                names.sort();
                names.dedup();
                (room, names)
            })
            .collect();
        Ok(Catalog(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }

    pub fn classes(&self, room: RoomType) -> &[String] {
        self.0.get(&room).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn validate(&self) -> Result<()> {
        for room in RoomType::ALL {
            if self.classes(room).is_empty() {
                return Err(Error::validation("catalog", format!("no classes for {room}")));
            }
        }
        Ok(())
    }
}

/// Parses a newline-separated name list; `#` starts a comment line.
pub fn parse_name_lines(text: &str) -> Vec<String> {
    let mut v: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_name)
        .collect();
    v.sort();
    v.dedup();
    v
}

pub fn bundled_distractors() -> Vec<String> {
    parse_name_lines(DISTRACTORS_TXT)
}

/// Instructions to issue per room type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstructionSet(BTreeMap<RoomType, Vec<String>>);

impl InstructionSet {
    pub fn bundled() -> Self {
        Self::from_json(INSTRUCTIONS_JSON).expect("bundled instructions are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map(InstructionSet)
            .map_err(|e| Error::parse("instructions", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }

    pub fn for_room(&self, room: RoomType) -> &[String] {
        self.0.get(&room).map(Vec::as_slice).unwrap_or(&[])
    }
}
