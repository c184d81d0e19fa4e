//! Experiment configuration and the end-to-end run: explore, detect,
//! aggregate, plan, validate, evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{parse_name_lines, read_text, Catalog, InstructionSet};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_success, failure_breakdown, render_table, EvalItem, FailureBreakdown, Outcome, SuccessTable,
    VoteStore,
};
use crate::exploration::{plan_poses, CollectionStrategy, StrategyConfig};
use crate::grounding::{validate, GroundingVerdict, RuleMode, RuleSet, SynonymTable, ValidationRecord};
use crate::perception::{aggregate_object_list, detect_views, CameraConfig, DetectorConfig};
use crate::plan::{
    request_plan, BackendConfig, Cassette, CassetteMode, FixedBackend, HttpBackend, Plan, PlanBackend,
    PromptMode, PromptTemplate, DEFAULT_MAX_TOKENS,
};
use crate::rng::derive_seed;
use crate::scene::{file_stem, ground_truth_object_list, load_scene_dir, save_scene, RoomType, Scene};
use crate::scenegen::{generate_synthetic_scene, SceneGenSpec};

pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "success_table.txt";
pub const ITEMS_FILE: &str = "items.jsonl";
pub const PLANS_FILE: &str = "plans.jsonl";
pub const VALIDATION_FILE: &str = "validation.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const VOTES_FILE: &str = "votes.jsonl";
pub const SCENES_DIR: &str = "scenes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    #[default]
    AutoOnly,
    HumanVotes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateScenes {
    pub count: usize,
    pub seed: u64,
}

/// Either a directory of scene files or a generator request. Generated
/// scenes cycle through the room types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateScenes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Replay,
    Record,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Falls back to `PLAN_BACKEND_URL`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cassette: Option<PathBuf>,
    /// Completion returned by the `fixed` backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

fn default_model() -> String {
    "planner".into()
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

fn default_timeout() -> f64 {
    60.0
}

/// Optional overrides for bundled data files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputFiles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synonyms: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distractors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub scenes: SceneSource,
    #[serde(default = "default_strategy")]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub detector: DetectorSection,
    pub backend: BackendSection,
    #[serde(default)]
    pub rules: RuleMode,
    #[serde(default)]
    pub evaluation: EvaluationMode,
    #[serde(default)]
    pub inputs: InputFiles,
}

/// Detector parameters; the distractor vocabulary comes from
/// `inputs.distractors` or the bundled list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub true_positive_rate: f64,
    pub false_positive_rate: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        DetectorSection {
            true_positive_rate: d.true_positive_rate,
            false_positive_rate: d.false_positive_rate,
        }
    }
}

fn default_strategy() -> StrategyConfig {
    CollectionStrategy::default().into()
}

impl ExperimentConfig {
    /// Parses TOML; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.resolve_paths(base_dir);
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&read_text(path)?, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(d) = &mut self.scenes.dir {
            fix(d);
        }
        if let Some(c) = &mut self.backend.cassette {
            fix(c);
        }
        for p in [
            &mut self.inputs.template,
            &mut self.inputs.instructions,
            &mut self.inputs.synonyms,
            &mut self.inputs.catalog,
            &mut self.inputs.distractors,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks internal consistency and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        match (&self.scenes.dir, &self.scenes.generate) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("scenes needs exactly one of `dir` or `generate`".into()))
            }
            (Some(d), None) if !d.is_dir() => {
                return Err(Error::Config(format!("scene directory {} does not exist", d.display())))
            }
            (None, Some(g)) if g.count == 0 => return Err(Error::Config("scenes.generate.count is zero".into())),
            _ => {}
        }
        self.strategy()?;
        self.camera.validate()?;
        self.detector_config()?.validate()?;
        for p in [
            &self.inputs.template,
            &self.inputs.instructions,
            &self.inputs.synonyms,
            &self.inputs.catalog,
            &self.inputs.distractors,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        match self.backend.kind {
            BackendKind::Replay => match &self.backend.cassette {
                Some(c) if c.is_file() => {}
                Some(c) => return Err(Error::Config(format!("cassette {} does not exist", c.display()))),
                None => return Err(Error::Config("replay backend needs a cassette".into())),
            },
            BackendKind::Record if self.backend.cassette.is_none() => {
                return Err(Error::Config("record backend needs a cassette".into()))
            }
            BackendKind::Fixed if self.backend.text.is_none() => {
                return Err(Error::Config("fixed backend needs `text`".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn strategy(&self) -> Result<CollectionStrategy> {
        self.strategy.clone().try_into()
    }

    pub fn detector_config(&self) -> Result<DetectorConfig> {
        let vocab = match &self.inputs.distractors {
            Some(p) => parse_name_lines(&read_text(p)?),
            None => crate::data::bundled_distractors(),
        };
        Ok(DetectorConfig {
            true_positive_rate: self.detector.true_positive_rate,
            false_positive_rate: self.detector.false_positive_rate,
            distractor_vocabulary: vocab,
        })
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        match &self.inputs.template {
            Some(p) => PromptTemplate::load(p, PromptMode::Inference),
            None => Ok(PromptTemplate::bundled_inference()),
        }
    }

    pub fn instructions(&self) -> Result<InstructionSet> {
        match &self.inputs.instructions {
            Some(p) => InstructionSet::load(p),
            None => Ok(InstructionSet::bundled()),
        }
    }

    pub fn synonyms(&self) -> Result<SynonymTable> {
        match &self.inputs.synonyms {
            Some(p) => SynonymTable::load(p),
            None => Ok(SynonymTable::bundled()),
        }
    }

    pub fn catalog(&self) -> Result<Catalog> {
        match &self.inputs.catalog {
            Some(p) => Catalog::load(p),
            None => Ok(Catalog::bundled()),
        }
    }

    pub fn build_backend(&self) -> Result<Box<dyn PlanBackend>> {
        let b = &self.backend;
        let http = || -> Result<HttpBackend> {
            let mut c = match &b.url {
                Some(u) => {
                    let mut c = BackendConfig::new(u.clone());
                    c.key = std::env::var(crate::plan::backend::BACKEND_KEY_ENV).ok().filter(|k| !k.is_empty());
                    c
                }
                None => BackendConfig::from_env()?,
            };
            c.model = b.model.clone();
            c.max_tokens = b.max_tokens;
            c.timeout_secs = b.timeout_secs;
            Ok(HttpBackend::new(c))
        };
        Ok(match b.kind {
            BackendKind::Http => Box::new(http()?),
            BackendKind::Fixed => Box::new(FixedBackend::new(b.text.clone().unwrap_or_default())),
            BackendKind::Replay => Box::new(Cassette::open(
                b.cassette.as_ref().expect("validated"),
                CassetteMode::Replay,
                None,
            )?),
            BackendKind::Record => Box::new(Cassette::open(
                b.cassette.as_ref().expect("validated"),
                CassetteMode::Record,
                Some(Box::new(http()?)),
            )?),
        })
    }

    /// Loads or generates the scene corpus.
    pub fn scenes(&self) -> Result<Vec<Scene>> {
        if let Some(dir) = &self.scenes.dir {
            let scenes = load_scene_dir(dir)?;
            if scenes.is_empty() {
                return Err(Error::Empty(format!("no scenes in {}", dir.display())));
            }
            return Ok(scenes);
        }
        let g = self.scenes.generate.as_ref().expect("validated");
        let catalog = self.catalog()?;
        generate_scenes(&catalog, g.count, g.seed)
    }
}

/// `count` scenes cycling kitchen, living room, bedroom, bathroom; scene
/// `i` uses `derive_seed(seed, i)`.
pub fn generate_scenes(catalog: &Catalog, count: usize, seed: u64) -> Result<Vec<Scene>> {
    (0..count)
        .map(|i| {
            let spec = SceneGenSpec::for_room(RoomType::ALL[i % 4], catalog.clone());
            generate_synthetic_scene(&spec, derive_seed(seed, i as u64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub scene_id: String,
    pub view: usize,
    pub pose: crate::exploration::CameraPose,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub item_id: String,
    pub scene_id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub item_id: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<GroundingVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: String,
    pub room_type: RoomType,
    pub scene_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_object_count: Option<usize>,
    pub ground_truth_object_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub items: Vec<ItemSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    pub backend: String,
    pub strategy: StrategyConfig,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub evaluation: EvaluationMode,
    pub scenes: Vec<SceneSummary>,
    pub success_table: SuccessTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_breakdown: Option<FailureBreakdown>,
    /// Items that failed before producing a validated plan.
    pub errored_items: Vec<String>,
    /// Human-vote mode only: some items still lack three votes.
    pub incomplete: bool,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn image_counts(&self) -> Vec<Option<usize>> {
        self.scenes.iter().map(|s| s.image_count).collect()
    }
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(format!("{} line {}", path.display(), n + 1), e))?,
        );
    }
    Ok(out)
}

pub fn read_items(run_dir: &Path) -> Result<Vec<EvalItem>> {
    read_jsonl(&run_dir.join(ITEMS_FILE))
}

pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    let path = dir.join(REPORT_FILE);
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    let label = report.provenance.strategy.criterion;
    let table = render_table(&[(format!("{label:?}").to_lowercase(), report.success_table.clone())]);
    let path = dir.join(TABLE_FILE);
    fs::write(&path, table).map_err(|e| Error::io(&path, e))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path.display().to_string(), e))
}

struct SceneResult {
    summary: SceneSummary,
    detections: Vec<DetectionRecord>,
    plans: Vec<PlanRecord>,
    validations: Vec<ValidationRecord>,
    items: Vec<EvalItem>,
}

#[allow(clippy::too_many_arguments)]
fn run_scene(
    scene: &Scene,
    seed: u64,
    strategy: &CollectionStrategy,
    camera: &CameraConfig,
    detector: &DetectorConfig,
    backend: &dyn PlanBackend,
    model: &str,
    max_tokens: u32,
    template: &PromptTemplate,
    instructions: &[String],
    synonyms: &SynonymTable,
    rules: &RuleSet,
) -> SceneResult {
    let truth = ground_truth_object_list(scene);
    let mut res = SceneResult {
        summary: SceneSummary {
            scene_id: scene.id.clone(),
            room_type: scene.room_type,
            scene_file: format!("{SCENES_DIR}/{}.json", file_stem(&scene.id)),
            image_count: None,
            predicted_object_count: None,
            ground_truth_object_count: truth.len(),
            error: None,
            items: Vec::new(),
        },
        detections: Vec::new(),
        plans: Vec::new(),
        validations: Vec::new(),
        items: Vec::new(),
    };
    let perceived = plan_poses(scene, strategy, derive_seed(seed, 0))
        .and_then(|poses| detect_views(scene, &poses, camera, detector, derive_seed(seed, 1)));
    let views = match perceived {
        Ok(v) => v,
        Err(e) => {
            log::warn!("scene {}: {e}", scene.id);
            res.summary.error = Some(e.to_string());
            return res;
        }
    };
    let predicted = aggregate_object_list(&views);
    res.summary.image_count = Some(views.len());
    res.summary.predicted_object_count = Some(predicted.len());
    res.detections = views
        .into_iter()
        .enumerate()
        .map(|(i, v)| DetectionRecord {
            scene_id: scene.id.clone(),
            view: i,
            pose: v.pose,
            names: v.names,
        })
        .collect();
    for (qi, instruction) in instructions.iter().enumerate() {
        let item_id = format!("{}#{qi}", scene.id);
        let mut record = PlanRecord {
            item_id: item_id.clone(),
            scene_id: scene.id.clone(),
            instruction: instruction.clone(),
            plan: None,
            error: None,
        };
        let mut summary = ItemSummary {
            item_id: item_id.clone(),
            instruction: instruction.clone(),
            verdict: None,
            error: None,
        };
        match request_plan(backend, model, max_tokens, template, &predicted, instruction) {
            Ok(plan) => {
                let report = validate(&plan, &truth, synonyms, rules);
                summary.verdict = Some(report.verdict);
                res.validations.push(ValidationRecord {
                    plan_id: item_id.clone(),
                    report: report.clone(),
                });
                res.items.push(EvalItem {
                    item_id: item_id.clone(),
                    scene_id: scene.id.clone(),
                    room_type: scene.room_type,
                    instruction: instruction.clone(),
                    plan: plan.clone(),
                    object_list: truth.clone(),
                    auto_report: Some(report),
                });
                record.plan = Some(plan);
            }
            Err(e) => {
                log::warn!("item {item_id}: {e}");
                record.error = Some(e.to_string());
                summary.error = Some(e.to_string());
            }
        }
        res.plans.push(record);
        res.summary.items.push(summary);
    }
    res
}

/// Runs the whole pipeline and writes every artifact under the output
/// directory. Stage errors are recorded per scene or item and the run
/// continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let strategy = config.strategy()?;
    let detector = config.detector_config()?;
    let template = config.template()?;
    let instructions = config.instructions()?;
    let synonyms = config.synonyms()?;
    let rules = RuleSet::for_mode(config.rules);
    let backend = config.build_backend()?;
    let scenes = config.scenes()?;

    let out = &config.output_dir;
    let scene_dir = out.join(SCENES_DIR);
    fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;

    let mut results = Vec::with_capacity(scenes.len());
    for (si, scene) in scenes.iter().enumerate() {
        save_scene(scene, scene_dir.join(format!("{}.json", file_stem(&scene.id))))?;
        results.push(run_scene(
            scene,
            derive_seed(config.master_seed, si as u64),
            &strategy,
            &config.camera,
            &detector,
            backend.as_ref(),
            &config.backend.model,
            config.backend.max_tokens,
            &template,
            instructions.for_room(scene.room_type),
            &synonyms,
            &rules,
        ));
    }

    let detections: Vec<_> = results.iter().flat_map(|r| r.detections.iter().cloned()).collect();
    let plans: Vec<_> = results.iter().flat_map(|r| r.plans.iter().cloned()).collect();
    let validations: Vec<_> = results.iter().flat_map(|r| r.validations.iter().cloned()).collect();
    let items: Vec<_> = results.iter().flat_map(|r| r.items.iter().cloned()).collect();
    write_jsonl(&out.join(DETECTIONS_FILE), &detections)?;
    write_jsonl(&out.join(PLANS_FILE), &plans)?;
    write_jsonl(&out.join(VALIDATION_FILE), &validations)?;
    write_jsonl(&out.join(ITEMS_FILE), &items)?;

    let errored_items: Vec<String> = plans.iter().filter(|p| p.error.is_some()).map(|p| p.item_id.clone()).collect();
    let (success_table, breakdown, incomplete) = match config.evaluation {
        EvaluationMode::AutoOnly => {
            let outcomes: Vec<(RoomType, Outcome)> = items
                .iter()
                .filter_map(|i| i.auto_report.as_ref().map(|r| (i.room_type, r.verdict.into())))
                .collect();
            let table = aggregate_success(outcomes.iter().map(|(r, o)| (*r, o)));
            (table, failure_breakdown(outcomes.iter().map(|(_, o)| o)).ok(), false)
        }
        EvaluationMode::HumanVotes => {
            let store = VoteStore::open(out.join(VOTES_FILE), items.clone())?;
            let progress = store.progress();
            (store.success_table(), store.failure_breakdown().ok(), !progress.is_complete())
        }
    };

    let mut artifacts: Vec<String> = vec![
        DETECTIONS_FILE.into(),
        PLANS_FILE.into(),
        VALIDATION_FILE.into(),
        ITEMS_FILE.into(),
        TABLE_FILE.into(),
    ];
    if config.evaluation == EvaluationMode::HumanVotes {
        artifacts.push(VOTES_FILE.into());
    }
    artifacts.extend(results.iter().map(|r| r.summary.scene_file.clone()));
    let report = ExperimentReport {
        evaluation: config.evaluation,
        scenes: results.into_iter().map(|r| r.summary).collect(),
        success_table,
        failure_breakdown: breakdown,
        errored_items,
        incomplete,
        provenance: Provenance {
            config_hash: config.hash(),
            master_seed: config.master_seed,
            backend: backend.identifier(),
            strategy: config.strategy.clone(),
            artifacts,
        },
    };
    write_report(out, &report)?;
    Ok(report)
}

/// Tables recomputed from a finished run's items and its vote log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteSummary {
    pub success_table: SuccessTable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_breakdown: Option<FailureBreakdown>,
    pub progress: crate::eval::Progress,
}

pub fn evaluate_votes(run_dir: &Path, votes: Option<&Path>) -> Result<VoteSummary> {
    let items = read_items(run_dir)?;
    let log = votes.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join(VOTES_FILE));
    if !log.is_file() {
        return Err(Error::Config(format!("vote log {} does not exist", log.display())));
    }
    let store = VoteStore::open(log, items)?;
    Ok(VoteSummary {
        success_table: store.success_table(),
        failure_breakdown: store.failure_breakdown().ok(),
        progress: store.progress(),
    })
}

/// One row per labelled table, in the shared export layout.
pub fn report_rows(reports: &[(String, ExperimentReport)]) -> String {
    let rows: Vec<(String, SuccessTable)> = reports
        .iter()
        .map(|(label, r)| (label.clone(), r.success_table.clone()))
        .collect();
    render_table(&rows)
}

/// Mean image count per room type and overall.
pub fn mean_image_counts(report: &ExperimentReport) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in &report.scenes {
        if let Some(c) = s.image_count {
            for key in [s.room_type.as_str().to_string(), "all".to_string()] {
                let e = sums.entry(key).or_default();
                e.0 += c;
                e.1 += 1;
            }
        }
    }
    sums.into_iter().map(|(k, (s, n))| (k, s as f64 / n as f64)).collect()
}
