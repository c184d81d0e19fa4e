use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ObjectList;

pub const OBJECT_LIST_PLACEHOLDER: &str = "{OBJECT_LIST}";
pub const INSTRUCTION_PLACEHOLDER: &str = "{INSTRUCTION}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Dataset synthesis from an object list alone.
    Generation,
    /// Planning for a given instruction.
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub mode: PromptMode,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>, mode: PromptMode) -> Result<Self> {
        let t = PromptTemplate {
            name: name.into(),
            body: body.into(),
            mode,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn bundled_inference() -> Self {
        Self::new("inference", crate::data::INFERENCE_TEMPLATE, PromptMode::Inference)
            .expect("bundled template is valid")
    }

    pub fn bundled_generation() -> Self {
        Self::new("generation", crate::data::GENERATION_TEMPLATE, PromptMode::Generation)
            .expect("bundled template is valid")
    }

    /// Loads a plain-text template; its name is the file stem.
    pub fn load(path: impl AsRef<Path>, mode: PromptMode) -> Result<Self> {
        let path = path.as_ref();
        let body = crate::data::read_text(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "template".into());
        Self::new(name, body, mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.body.contains(OBJECT_LIST_PLACEHOLDER) {
            return Err(Error::Template(format!("{} lacks {OBJECT_LIST_PLACEHOLDER}", self.name)));
        }
        if self.mode == PromptMode::Inference && !self.body.contains(INSTRUCTION_PLACEHOLDER) {
            return Err(Error::Template(format!("{} lacks {INSTRUCTION_PLACEHOLDER}", self.name)));
        }
        Ok(())
    }
}

/// Substitutes both placeholders in one left-to-right pass, so values that
/// themselves contain placeholder text are inserted verbatim.
pub fn build_prompt(template: &PromptTemplate, object_list: &ObjectList, instruction: Option<&str>) -> Result<String> {
    template.validate()?;
    let instruction = match (template.mode, instruction) {
        (PromptMode::Inference, Some(i)) => Some(i),
        (PromptMode::Inference, None) => {
            return Err(Error::Template("inference prompt needs an instruction".into()))
        }
        (PromptMode::Generation, Some(_)) => {
            return Err(Error::Template("generation prompt takes no instruction".into()))
        }
        (PromptMode::Generation, None) => None,
    };
    let objects = object_list.render();
    let mut out = String::with_capacity(template.body.len() + objects.len());
    let mut rest = template.body.as_str();
    loop {
        let next_list = rest.find(OBJECT_LIST_PLACEHOLDER);
        let next_instr = rest.find(INSTRUCTION_PLACEHOLDER);
        let (pos, len, value) = match (next_list, next_instr) {
            (Some(a), Some(b)) if b < a => (b, INSTRUCTION_PLACEHOLDER.len(), instruction.unwrap_or("")),
            (Some(a), _) => (a, OBJECT_LIST_PLACEHOLDER.len(), objects.as_str()),
            (None, Some(b)) => (b, INSTRUCTION_PLACEHOLDER.len(), instruction.unwrap_or("")),
            (None, None) => break,
        };
        out.push_str(&rest[..pos]);
        out.push_str(value);
        rest = &rest[pos + len..];
    }
    out.push_str(rest);
    Ok(out)
}
