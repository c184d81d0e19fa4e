//! Instruction dataset construction: room vocabularies, plausibility
//! constrained scene augmentation, triplet filtering and scene splits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::{check_hallucination, SynonymTable};
use crate::plan::template::{build_prompt, PromptTemplate};
use crate::plan::{parse_plan_text, ActionStep, BackendRequest, PlanBackend};
use crate::rng::{derive_seed, seeded};
use crate::scene::{ground_truth_object_list, save_scene_dir, ObjectList, RoomType, Scene};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomVocabulary {
    pub room_type: RoomType,
    pub names: Vec<String>,
}

pub fn room_type_vocabulary(scenes: &[Scene], room_type: RoomType) -> Result<RoomVocabulary> {
    let matching: Vec<&Scene> = scenes.iter().filter(|s| s.room_type == room_type).collect();
    if matching.is_empty() {
        return Err(Error::Empty(format!("no scenes of type {room_type}")));
    }
    let list = matching
        .iter()
        .fold(ObjectList::new(), |acc, s| acc.union(&ground_truth_object_list(s)));
    Ok(RoomVocabulary {
        room_type,
        names: list.names().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub scene: Scene,
    pub substitutions: usize,
    /// Substitutions drawn but skipped for lack of an eligible class.
    pub skipped: usize,
}

/// Replaces each object's class, with probability `substitution_prob`, by a
/// vocabulary class that is not currently present in the scene.
pub fn augment_scene(scene: &Scene, vocab: &RoomVocabulary, substitution_prob: f64, seed: u64) -> Result<AugmentOutcome> {
    if vocab.room_type != scene.room_type {
        return Err(Error::validation(
            "vocabulary",
            format!("vocabulary is for {}, scene is {}", vocab.room_type, scene.room_type),
        ));
    }
    if !(0.0..=1.0).contains(&substitution_prob) {
        return Err(Error::validation("substitution_prob", "outside [0, 1]"));
    }
    let mut rng = seeded(seed);
    let mut out = scene.clone();
    out.id = format!("{}~{seed:016x}", scene.id);
    let mut present: BTreeMap<String, usize> = BTreeMap::new();
    for o in &out.objects {
        *present.entry(o.class_name.clone()).or_default() += 1;
    }
    let (mut substitutions, mut skipped) = (0, 0);
    for i in 0..out.objects.len() {
        if !rng.random_bool(substitution_prob) {
            continue;
        }
        let eligible: Vec<&String> = vocab
            .names
            .iter()
            .filter(|n| !present.contains_key(n.as_str()))
            .collect();
        if eligible.is_empty() {
            skipped += 1;
            continue;
        }
        let new_class = eligible[rng.random_range(0..eligible.len())].clone();
        let old = std::mem::replace(&mut out.objects[i].class_name, new_class.clone());
        if let Some(c) = present.get_mut(&old) {
            *c -= 1;
            if *c == 0 {
                present.remove(&old);
            }
        }
        *present.entry(new_class).or_default() += 1;
        substitutions += 1;
    }
    Ok(AugmentOutcome {
        scene: out,
        substitutions,
        skipped,
    })
}

/// Each source scene yields an unmodified copy (`<id>-v0`) plus
/// `factor - 1` augmented variants (`<id>-v<j>`). Vocabularies are built
/// per room type from the input scenes.
pub fn expand_scenes(scenes: &[Scene], factor: usize, substitution_prob: f64, seed: u64) -> Result<Vec<Scene>> {
    if factor < 1 {
        return Err(Error::validation("factor", "must be at least 1"));
    }
    let vocabs: BTreeMap<RoomType, RoomVocabulary> = scenes
        .iter()
        .map(|s| s.room_type)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|r| room_type_vocabulary(scenes, r).map(|v| (r, v)))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(scenes.len() * factor);
    for (i, scene) in scenes.iter().enumerate() {
        let mut original = scene.clone();
        original.id = format!("{}-v0", scene.id);
        out.push(original);
        let base = derive_seed(seed, i as u64);
        for j in 1..factor {
            let mut variant = augment_scene(scene, &vocabs[&scene.room_type], substitution_prob, derive_seed(base, j as u64))?.scene;
            variant.id = format!("{}-v{j}", scene.id);
            out.push(variant);
        }
    }
    Ok(out)
}

/// A dataset sample: scene reference, instruction and plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub scene_id: String,
    pub object_list: ObjectList,
    pub instruction: String,
    pub steps: Vec<ActionStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub raw: String,
}

/// Line format of a triplet file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub scene_id: String,
    pub object_list: ObjectList,
    pub instruction: String,
    pub steps: Vec<StepRecord>,
}

impl From<&Triplet> for TripletRecord {
    fn from(t: &Triplet) -> Self {
        TripletRecord {
            scene_id: t.scene_id.clone(),
            object_list: t.object_list.clone(),
            instruction: t.instruction.clone(),
            steps: t
                .steps
                .iter()
                .map(|s| StepRecord {
                    index: s.index,
                    raw: s.raw.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TripletRecord> for Triplet {
    type Error = Error;

    fn try_from(r: TripletRecord) -> Result<Self> {
        let text = r
            .steps
            .iter()
            .map(|s| format!("Step {}. {}", s.index, s.raw))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(Triplet {
            scene_id: r.scene_id,
            object_list: r.object_list,
            instruction: r.instruction,
            steps: parse_plan_text(&text)?,
        })
    }
}

pub fn write_triplets<W: Write>(mut out: W, triplets: &[Triplet]) -> std::io::Result<()> {
    for t in triplets {
        serde_json::to_writer(&mut out, &TripletRecord::from(t))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_triplets<R: BufRead>(input: R) -> Result<Vec<Triplet>> {
    let mut v = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::parse("triplets", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TripletRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(format!("triplets line {}", n + 1), e))?;
        v.push(rec.try_into()?);
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Rejection {
    ParseFailure,
    Hallucination { step: usize },
}

/// Accepts a generated (instruction, plan text) pair only when the plan
/// parses and references nothing outside the object list.
pub fn filter_generated_sample(
    scene_id: &str,
    instruction: &str,
    raw_plan: &str,
    object_list: &ObjectList,
    synonyms: &SynonymTable,
) -> std::result::Result<Triplet, Rejection> {
    let steps = parse_plan_text(raw_plan).map_err(|_| Rejection::ParseFailure)?;
    let plan = crate::plan::Plan {
        instruction: instruction.to_string(),
        steps,
        raw_text: raw_plan.to_string(),
        source: String::new(),
    };
    if let Some(bad) = check_hallucination(&plan, object_list, synonyms)
        .iter()
        .find(|m| m.hallucinated)
    {
        return Err(Rejection::Hallucination { step: bad.index });
    }
    Ok(Triplet {
        scene_id: scene_id.to_string(),
        object_list: object_list.clone(),
        instruction: instruction.to_string(),
        steps: plan.steps,
    })
}

/// Splits generation output into (instruction, plan text) blocks. A block
/// starts at a line beginning with `Instruction:`.
pub fn parse_generation_output(text: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, Vec<&str>)> = Vec::new();
    for line in text.lines() {
        let t = line.trim_start();
        let is_header = t.len() >= 12 && t[..12].eq_ignore_ascii_case("instruction:");
        if is_header {
            out.push((t[12..].trim().to_string(), Vec::new()));
        } else if let Some((_, body)) = out.last_mut() {
            body.push(line);
        }
    }
    out.into_iter()
        .filter(|(i, _)| !i.is_empty())
        .map(|(i, body)| (i, body.join("\n")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    pub accepted: Vec<Triplet>,
    pub rejected: Vec<(String, Rejection)>,
}

/// Asks the backend for instruction/plan pairs over the scene's
/// ground-truth object list and keeps the executable ones.
pub fn synthesize_triplets(
    scene: &Scene,
    backend: &dyn PlanBackend,
    template: &PromptTemplate,
    model: &str,
    max_tokens: u32,
    synonyms: &SynonymTable,
) -> Result<SynthesisOutcome> {
    let objects = ground_truth_object_list(scene);
    let prompt = build_prompt(template, &objects, None)?;
    let response = backend.complete(&BackendRequest {
        model: model.to_string(),
        prompt,
        max_tokens,
    })?;
    if response.text.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    let mut outcome = SynthesisOutcome {
        accepted: Vec::new(),
        rejected: Vec::new(),
    };
    for (instruction, body) in parse_generation_output(&response.text) {
        match filter_generated_sample(&scene.id, &instruction, &body, &objects, synonyms) {
            Ok(t) => outcome.accepted.push(t),
            Err(r) => outcome.rejected.push((instruction, r)),
        }
    }
    Ok(outcome)
}

/// Seeded shuffle per room type; each type contributes
/// `floor(n · (1 - train_fraction))` scenes to evaluation, the rest to
/// training. Both halves keep input order.
pub fn split_scenes(scenes: &[Scene], train_fraction: f64, seed: u64) -> Result<(Vec<Scene>, Vec<Scene>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::validation("train_fraction", "must be in (0, 1)"));
    }
    if scenes.len() < 2 {
        return Err(Error::Empty("need at least two scenes to split".into()));
    }
    let mut eval_idx = BTreeSet::new();
    for (r, room) in RoomType::ALL.iter().enumerate() {
        let mut idx: Vec<usize> = (0..scenes.len()).filter(|&i| scenes[i].room_type == *room).collect();
        let n_eval = ((idx.len() as f64) * (1.0 - train_fraction) + 1e-9).floor() as usize;
        idx.shuffle(&mut seeded(derive_seed(seed, r as u64)));
        eval_idx.extend(idx.into_iter().take(n_eval));
    }
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (i, s) in scenes.iter().enumerate() {
        if eval_idx.contains(&i) {
            eval.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    Ok((train, eval))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub file: String,
    pub split: Split,
}

/// Provenance of a dataset build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub scenes: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triplets_file: Option<String>,
}

/// Writes `train/` and `eval/` scene directories plus `manifest.json`.
pub fn save_split(
    out: &std::path::Path,
    train: &[Scene],
    eval: &[Scene],
    seed: u64,
    train_fraction: f64,
) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    for (name, split, scenes) in [("train", Split::Train, train), ("eval", Split::Eval, eval)] {
        for (scene, path) in scenes.iter().zip(save_scene_dir(scenes, out.join(name))?) {
            let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            entries.push(ManifestEntry {
                scene_id: scene.id.clone(),
                file: format!("{name}/{file}"),
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        seed,
        train_fraction,
        scenes: entries,
        backend: None,
        template: None,
        triplets_file: None,
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Accepted triplets, rejected `(scene_id, instruction, reason)` samples and
/// scenes whose generation call failed.
pub type CorpusOutcome = (Vec<Triplet>, Vec<(String, String, Rejection)>, Vec<(String, Error)>);

/// Per-scene synthesis over a corpus. Backend failures are logged and the
/// scene is skipped.
pub fn synthesize_corpus(
    scenes: &[Scene],
    backend: &dyn PlanBackend,
    template: &PromptTemplate,
    model: &str,
    max_tokens: u32,
    synonyms: &SynonymTable,
) -> CorpusOutcome {
    let (mut accepted, mut rejected, mut failed) = (Vec::new(), Vec::new(), Vec::new());
    for scene in scenes {
        match synthesize_triplets(scene, backend, template, model, max_tokens, synonyms) {
            Ok(out) => {
                accepted.extend(out.accepted);
                rejected.extend(out.rejected.into_iter().map(|(i, r)| (scene.id.clone(), i, r)));
            }
            Err(e) => {
                log::warn!("scene {}: {e}", scene.id);
                failed.push((scene.id.clone(), e));
            }
        }
    }
    (accepted, rejected, failed)
}
