use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use groundplan::data::Catalog;
use groundplan::dataset::{expand_scenes, save_split, split_scenes, synthesize_corpus, write_triplets};
use groundplan::eval::render_table;
use groundplan::experiment::{
    evaluate_votes, generate_scenes, read_report, report_rows, run_experiment, ExperimentConfig,
};
use groundplan::exploration::{plan_poses, CollectionStrategy, Criterion};
use groundplan::grounding::{validate, RuleMode, RuleSet, SynonymTable};
use groundplan::perception::{aggregate_object_list, detect_views, write_detections, DetectorConfig};
use groundplan::plan::{
    request_plan, BackendConfig, Cassette, CassetteMode, HttpBackend, Plan, PlanBackend, PromptTemplate,
    DEFAULT_MAX_TOKENS,
};
use groundplan::scene::{ground_truth_object_list, load_scene, load_scene_dir, save_scene_dir, ObjectList, RoomType};
use groundplan::scenegen::{generate_synthetic_scene, SceneGenSpec};
use groundplan_server::AppState;

#[derive(Parser)]
#[command(name = "groundplan", version, about = "Grounded embodied task planning pipeline")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes.
    GenScenes {
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// Restrict to one room type; otherwise cycle through all four.
        #[arg(long)]
        room: Option<RoomType>,
    },
    /// Plan camera poses for a scene and run the simulated detector.
    Explore {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, default_value_t = 0.95)]
        tpr: f64,
        #[arg(long, default_value_t = 0.0)]
        fpr: f64,
    },
    /// Ask the planning backend for a plan.
    Plan {
        #[arg(long)]
        instruction: String,
        #[command(flatten)]
        objects: ObjectArgs,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Check a plan for hallucinated objects and impossible orderings.
    Validate {
        /// Plan text file ("Step 1. ..." lines).
        #[arg(long)]
        plan: PathBuf,
        #[command(flatten)]
        objects: ObjectArgs,
        #[arg(long, value_enum, default_value_t = Rules::Lenient)]
        rules: Rules,
    },
    /// Expand a scene corpus with plausibility-constrained class swaps.
    Augment {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long, default_value_t = 0.5)]
        prob: f64,
    },
    /// Stratified train/eval split of a scene corpus.
    Split {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },
    /// Synthesize instruction/plan triplets for a scene corpus.
    GenDataset {
        #[arg(long)]
        scenes: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run the full experiment described by --config.
    Run,
    /// Recompute tables from a run directory and its vote log.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        votes: Option<PathBuf>,
    },
    /// Render report.json files as one table.
    Report {
        /// `label=path` or `path`; the label defaults to the parent directory name.
        #[arg(required = true)]
        reports: Vec<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum, default_value_t = CriterionArg::Blockwise)]
    criterion: CriterionArg,
    #[arg(long, default_value_t = 0.75)]
    grid: f64,
    #[arg(long, default_value_t = 120.0)]
    unit_angle: f64,
    /// Sampling ratio for the random criterion.
    #[arg(long, default_value_t = 0.25)]
    ratio: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Traversal,
    Random,
    Center,
    Blockwise,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rules {
    Strict,
    Lenient,
}

#[derive(Args)]
struct ObjectArgs {
    /// Comma-separated object names.
    #[arg(long, conflicts_with = "scene")]
    objects: Option<String>,
    /// Scene file whose ground-truth list is used.
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Args)]
struct BackendArgs {
    /// Cassette file; replayed unless --record is given.
    #[arg(long)]
    cassette: Option<PathBuf>,
    #[arg(long, requires = "cassette")]
    record: bool,
    #[arg(long, default_value = "planner")]
    model: String,
    #[arg(long, default_value_t = DEFAULT_MAX_TOKENS)]
    max_tokens: u32,
}

impl StrategyArgs {
    fn build(&self) -> CollectionStrategy {
        let criterion = match self.criterion {
            CriterionArg::Traversal => Criterion::Traversal,
            CriterionArg::Random => Criterion::Random { ratio: self.ratio },
            CriterionArg::Center => Criterion::OverallCenter,
            CriterionArg::Blockwise => CollectionStrategy::default().criterion,
        };
        CollectionStrategy::new(criterion, self.grid, self.unit_angle)
    }
}

impl ObjectArgs {
    fn resolve(&self) -> Result<ObjectList> {
        match (&self.objects, &self.scene) {
            (Some(list), _) => Ok(ObjectList::from_names(list.split(','))),
            (None, Some(path)) => Ok(ground_truth_object_list(&load_scene(path)?)),
            (None, None) => bail!("pass --objects or --scene"),
        }
    }
}

fn backend(args: &BackendArgs, config: Option<&ExperimentConfig>) -> Result<Box<dyn PlanBackend>> {
    if let (Some(cfg), None) = (config, &args.cassette) {
        return Ok(cfg.build_backend()?);
    }
    let http = || -> Result<Box<dyn PlanBackend>> {
        let mut c = BackendConfig::from_env()?;
        c.model = args.model.clone();
        c.max_tokens = args.max_tokens;
        Ok(Box::new(HttpBackend::new(c)))
    };
    match &args.cassette {
        Some(path) if args.record => Ok(Box::new(Cassette::open(path, CassetteMode::Record, Some(http()?))?)),
        Some(path) => Ok(Box::new(Cassette::open(path, CassetteMode::Replay, None)?)),
        None => http(),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(Some(cfg))
}

fn require_config(cfg: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
    cfg.context("this command needs --config")
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    let seed = cli.seed.or(config.as_ref().map(|c| c.master_seed)).unwrap_or(0);
    match &cli.command {
        Command::GenScenes { count, room } => {
            let catalog = match &config {
                Some(c) => c.catalog()?,
                None => Catalog::bundled(),
            };
            let scenes = match room {
                Some(r) => (0..*count)
                    .map(|i| {
                        generate_synthetic_scene(
                            &SceneGenSpec::for_room(*r, catalog.clone()),
                            groundplan::rng::derive_seed(seed, i as u64),
                        )
                    })
                    .collect::<groundplan::Result<Vec<_>>>()?,
                None => generate_scenes(&catalog, *count, seed)?,
            };
            let dir = out_dir(&cli, "scenes");
            let paths = save_scene_dir(&scenes, &dir)?;
            println!("wrote {} scenes to {}", paths.len(), dir.display());
        }
        Command::Explore { scene, strategy, tpr, fpr } => {
            let scene = load_scene(scene)?;
            let strategy = strategy.build();
            strategy.validate()?;
            let det = DetectorConfig {
                true_positive_rate: *tpr,
                false_positive_rate: *fpr,
                ..DetectorConfig::default()
            };
            let camera = config.as_ref().map(|c| c.camera).unwrap_or_default();
            let poses = plan_poses(&scene, &strategy, seed)?;
            let views = detect_views(&scene, &poses, &camera, &det, seed)?;
            if let Some(path) = &cli.out {
                let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
                let mut w = std::io::BufWriter::new(file);
                write_detections(&mut w, &views)?;
                w.flush()?;
            }
            print_json(&json!({
                "scene_id": scene.id,
                "image_count": poses.len(),
                "object_list": aggregate_object_list(&views),
                "ground_truth": ground_truth_object_list(&scene),
            }))?;
        }
        Command::Plan { instruction, objects, backend: args } => {
            let objects = objects.resolve()?;
            let b = backend(args, config.as_ref())?;
            let template = match &config {
                Some(c) => c.template()?,
                None => PromptTemplate::bundled_inference(),
            };
            let plan = request_plan(b.as_ref(), &args.model, args.max_tokens, &template, &objects, instruction)?;
            print_json(&plan)?;
        }
        Command::Validate { plan, objects, rules } => {
            let text = fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
            let plan = Plan::from_text("", &text, &plan.display().to_string())?;
            let synonyms = match &config {
                Some(c) => c.synonyms()?,
                None => SynonymTable::bundled(),
            };
            let mode = match rules {
                Rules::Strict => RuleMode::Strict,
                Rules::Lenient => RuleMode::Lenient,
            };
            print_json(&validate(&plan, &objects.resolve()?, &synonyms, &RuleSet::for_mode(mode)))?;
        }
        Command::Augment { scenes, factor, prob } => {
            let input = load_scene_dir(scenes)?;
            let expanded = expand_scenes(&input, *factor, *prob, seed)?;
            let dir = out_dir(&cli, "augmented");
            save_scene_dir(&expanded, &dir)?;
            println!("wrote {} scenes to {}", expanded.len(), dir.display());
        }
        Command::Split { scenes, train_fraction } => {
            let input = load_scene_dir(scenes)?;
            let (train, eval) = split_scenes(&input, *train_fraction, seed)?;
            let dir = out_dir(&cli, "split");
            save_split(&dir, &train, &eval, seed, *train_fraction)?;
            println!("train {} / eval {} scenes in {}", train.len(), eval.len(), dir.display());
        }
        Command::GenDataset { scenes, backend: args } => {
            let input = load_scene_dir(scenes)?;
            let b = backend(args, config.as_ref())?;
            let synonyms = match &config {
                Some(c) => c.synonyms()?,
                None => SynonymTable::bundled(),
            };
            let template = PromptTemplate::bundled_generation();
            let (accepted, rejected, failed) =
                synthesize_corpus(&input, b.as_ref(), &template, &args.model, args.max_tokens, &synonyms);
            let path = out_dir(&cli, "triplets.jsonl");
            let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
            write_triplets(&mut w, &accepted)?;
            w.flush()?;
            println!(
                "{} triplets written to {}; {} rejected; {} scenes failed",
                accepted.len(),
                path.display(),
                rejected.len(),
                failed.len()
            );
        }
        Command::Run => {
            let cfg = require_config(config)?;
            let report = run_experiment(&cfg)?;
            print!("{}", render_table(&[("run".into(), report.success_table.clone())]));
            println!(
                "{} scenes, {} errored items, output in {}",
                report.scenes.len(),
                report.errored_items.len(),
                cfg.output_dir.display()
            );
        }
        Command::Evaluate { run, votes } => {
            let summary = evaluate_votes(run, votes.as_deref())?;
            print!("{}", render_table(&[("votes".into(), summary.success_table.clone())]));
            print_json(&summary)?;
        }
        Command::Report { reports } => {
            let rows = reports
                .iter()
                .map(|spec| {
                    let (label, path) = match spec.split_once('=') {
                        Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                        None => (default_label(Path::new(spec)), PathBuf::from(spec)),
                    };
                    Ok((label, read_report(&path)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let table = report_rows(&rows);
            match &cli.out {
                Some(path) => fs::write(path, &table)?,
                None => print!("{table}"),
            }
        }
        Command::Serve { addr } => {
            let cfg = require_config(config)?;
            let state = AppState::from_config(&cfg)?;
            groundplan_server::serve_blocking(state, *addr)?;
        }
    }
    Ok(())
}

fn default_label(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
