//! Automated plan auditing against a scene object list.
//!
//! Two passes: object phrases are matched against the list (exact, synonym,
//! or part-of), and a small world-state machine replays the plan to flag
//! physically impossible orderings. The earliest flagged step decides the
//! verdict; on one step a hallucination outranks a counterfactual.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plan::{ActionStep, Plan, Verb};
use crate::scene::{normalize_name, ObjectList};

/// Name equivalence classes built from `a = b` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynonymTable {
    class_of: BTreeMap<String, usize>,
    classes: Vec<BTreeSet<String>>,
}

impl SynonymTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bundled() -> Self {
        Self::parse(crate::data::SYNONYMS_TXT).expect("bundled synonyms parse")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&crate::data::read_text(path.as_ref())?)
    }

    /// One `name = name` pair per line; blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = SynonymTable::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("synonyms", format!("line {}: expected `a = b`", n + 1)))?;
            let (a, b) = (normalize_name(a), normalize_name(b));
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse("synonyms", format!("line {}: empty name", n + 1)));
            }
            t.add_pair(&a, &b);
        }
        Ok(t)
    }

    pub fn add_pair(&mut self, a: &str, b: &str) {
        let (a, b) = (normalize_name(a), normalize_name(b));
        match (self.class_of.get(&a).copied(), self.class_of.get(&b).copied()) {
            (Some(x), Some(y)) if x == y => {}
            (Some(x), Some(y)) => {
                let moved = std::mem::take(&mut self.classes[y]);
                for name in &moved {
                    self.class_of.insert(name.clone(), x);
                }
                self.classes[x].extend(moved);
            }
            (Some(x), None) => {
                self.classes[x].insert(b.clone());
                self.class_of.insert(b, x);
            }
            (None, Some(y)) => {
                self.classes[y].insert(a.clone());
                self.class_of.insert(a, y);
            }
            (None, None) => {
                let id = self.classes.len();
                self.classes.push(BTreeSet::from([a.clone(), b.clone()]));
                self.class_of.insert(a, id);
                self.class_of.insert(b, id);
            }
        }
    }

    /// Other names equivalent to `name`, sorted.
    pub fn synonyms_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.class_of
            .get(name)
            .into_iter()
            .flat_map(move |&c| self.classes[c].iter())
            .map(String::as_str)
            .filter(move |n| *n != name)
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        a != b && matches!((self.class_of.get(a), self.class_of.get(b)), (Some(x), Some(y)) if x == y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Synonym,
    PartOf,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub kind: MatchKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_scene_name: Option<String>,
}

impl MatchResult {
    fn none() -> Self {
        MatchResult {
            kind: MatchKind::None,
            matched_scene_name: None,
        }
    }

    fn with(kind: MatchKind, name: &str) -> Self {
        MatchResult {
            kind,
            matched_scene_name: Some(name.to_string()),
        }
    }

    pub fn is_match(&self) -> bool {
        self.kind != MatchKind::None
    }
}

/// `needle`'s words occur contiguously in `hay`.
fn word_subsequence(needle: &str, hay: &str) -> bool {
    let n: Vec<&str> = needle.split(' ').collect();
    let h: Vec<&str> = hay.split(' ').collect();
    !n.is_empty() && n.len() <= h.len() && h.windows(n.len()).any(|w| w == n.as_slice())
}

/// Either name is a word-boundary substring of the other.
pub fn part_of_related(a: &str, b: &str) -> bool {
    word_subsequence(a, b) || word_subsequence(b, a)
}

pub fn match_object(phrase: &str, object_list: &ObjectList, synonyms: &SynonymTable) -> MatchResult {
    if object_list.contains(phrase) {
        return MatchResult::with(MatchKind::Exact, phrase);
    }
    // object_list iterates in sorted order, so the first hit is the smallest
    if let Some(name) = object_list.iter().find(|n| synonyms.are_synonyms(phrase, n)) {
        return MatchResult::with(MatchKind::Synonym, name);
    }
    if let Some(name) = object_list.iter().find(|n| part_of_related(phrase, n)) {
        return MatchResult::with(MatchKind::PartOf, name);
    }
    MatchResult::none()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub phrase: String,
    #[serde(flatten)]
    pub result: MatchResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMatches {
    pub index: usize,
    pub matches: Vec<PhraseMatch>,
    pub hallucinated: bool,
}

fn match_step(step: &ActionStep, object_list: &ObjectList, synonyms: &SynonymTable) -> StepMatches {
    let matches: Vec<PhraseMatch> = step
        .object_phrases
        .iter()
        .map(|p| PhraseMatch {
            phrase: p.clone(),
            result: match_object(p, object_list, synonyms),
        })
        .collect();
    StepMatches {
        index: step.index,
        hallucinated: matches.iter().any(|m| !m.result.is_match()),
        matches,
    }
}

pub fn check_hallucination(plan: &Plan, object_list: &ObjectList, synonyms: &SynonymTable) -> Vec<StepMatches> {
    plan.steps
        .iter()
        .map(|s| match_step(s, object_list, synonyms))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleMode {
    Strict,
    #[default]
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Strict only: act on an object only where it is, or while holding it.
    RequireMoveBeforeInteract,
    ForbidPlaceWithoutGrasp,
    ForbidDoubleGrasp,
    RequireToolForSlice,
    HandCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub mode: RuleMode,
    pub require_move_before_interact: bool,
    pub forbid_place_without_grasp: bool,
    pub forbid_double_grasp: bool,
    pub require_tool_for_slice: bool,
    /// Maximum simultaneously held objects; `None` disables the check.
    pub hand_capacity: Option<usize>,
}

impl RuleSet {
    pub fn strict() -> Self {
        RuleSet {
            mode: RuleMode::Strict,
            require_move_before_interact: true,
            forbid_place_without_grasp: true,
            forbid_double_grasp: true,
            require_tool_for_slice: true,
            hand_capacity: None,
        }
    }

    pub fn lenient() -> Self {
        RuleSet {
            mode: RuleMode::Lenient,
            require_move_before_interact: false,
            ..Self::strict()
        }
    }

    pub fn for_mode(mode: RuleMode) -> Self {
        match mode {
            RuleMode::Strict => Self::strict(),
            RuleMode::Lenient => Self::lenient(),
        }
    }

    fn move_rule_active(&self) -> bool {
        self.mode == RuleMode::Strict && self.require_move_before_interact
    }
}

impl Default for RuleSet {
    fn default() -> Self {
        Self::lenient()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub agent_location: Option<String>,
    pub holding: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationTrace {
    /// State after each step.
    pub states: Vec<WorldState>,
    /// Violated rule per step, if any.
    pub flags: Vec<Option<Rule>>,
}

fn is_cutting_tool(name: &str) -> bool {
    matches!(name.rsplit(' ').next(), Some("knife" | "cleaver"))
}

pub fn simulate_plan(plan: &Plan, object_list: &ObjectList, synonyms: &SynonymTable, rules: &RuleSet) -> SimulationTrace {
    let mut state = WorldState::default();
    let mut states = Vec::with_capacity(plan.steps.len());
    let mut flags = Vec::with_capacity(plan.steps.len());
    for step in &plan.steps {
        let resolved: Vec<Option<String>> = step
            .object_phrases
            .iter()
            .map(|p| match_object(p, object_list, synonyms).matched_scene_name)
            .collect();
        let direct = resolved.first().cloned().flatten();
        let flag = check_rules(step, direct.as_deref(), &state, rules);
        apply_transition(step, direct, &resolved, &mut state);
        flags.push(flag);
        states.push(state.clone());
    }
    SimulationTrace { states, flags }
}

fn check_rules(step: &ActionStep, direct: Option<&str>, state: &WorldState, rules: &RuleSet) -> Option<Rule> {
    let held = |n: &str| state.holding.contains(n);
    if rules.move_rule_active() && step.verb.is_interaction() {
        if let Some(d) = direct {
            let near = state
                .agent_location
                .as_deref()
                .is_some_and(|loc| part_of_related(loc, d));
            if !near && !held(d) {
                return Some(Rule::RequireMoveBeforeInteract);
            }
        }
    }
    match step.verb {
        Verb::Place if rules.forbid_place_without_grasp => {
            if direct.is_some_and(|d| !held(d)) {
                return Some(Rule::ForbidPlaceWithoutGrasp);
            }
        }
        Verb::Grasp => {
            if let Some(d) = direct {
                if rules.forbid_double_grasp && held(d) && !step.another_instance {
                    return Some(Rule::ForbidDoubleGrasp);
                }
                if rules.hand_capacity.is_some_and(|cap| state.holding.len() >= cap) {
                    return Some(Rule::HandCapacity);
                }
            }
        }
        Verb::Slice if rules.require_tool_for_slice
            && !state.holding.iter().any(|h| is_cutting_tool(h)) => {
                return Some(Rule::RequireToolForSlice);
            }
        _ => {}
    }
    None
}

fn apply_transition(step: &ActionStep, direct: Option<String>, resolved: &[Option<String>], state: &mut WorldState) {
    match step.verb {
        Verb::Move => {
            if let Some(dest) = resolved.iter().rev().flatten().next() {
                state.agent_location = Some(dest.clone());
            }
        }
        Verb::Grasp => {
            if let Some(d) = direct {
                state.holding.insert(d);
            }
        }
        Verb::Place => {
            if let Some(d) = direct {
                state.holding.remove(&d);
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingVerdict {
    Success,
    Hallucination,
    Counterfactual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub index: usize,
    pub matches: Vec<PhraseMatch>,
    pub hallucinated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterfactual: Option<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: GroundingVerdict,
    pub first_failure_step: Option<usize>,
    pub steps: Vec<StepReport>,
}

/// Report plus the plan identifier, as written to experiment logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub plan_id: String,
    #[serde(flatten)]
    pub report: ValidationReport,
}

pub fn validate(plan: &Plan, object_list: &ObjectList, synonyms: &SynonymTable, rules: &RuleSet) -> ValidationReport {
    let matches = check_hallucination(plan, object_list, synonyms);
    let trace = simulate_plan(plan, object_list, synonyms, rules);
    let steps: Vec<StepReport> = matches
        .into_iter()
        .zip(trace.flags)
        .map(|(m, flag)| StepReport {
            index: m.index,
            matches: m.matches,
            hallucinated: m.hallucinated,
            counterfactual: flag,
        })
        .collect();
    let first = steps
        .iter()
        .find(|s| s.hallucinated || s.counterfactual.is_some());
    let (verdict, first_failure_step) = match first {
        None => (GroundingVerdict::Success, None),
        Some(s) if s.hallucinated => (GroundingVerdict::Hallucination, Some(s.index)),
        Some(s) => (GroundingVerdict::Counterfactual, Some(s.index)),
    };
    ValidationReport {
        verdict,
        first_failure_step,
        steps,
    }
}
