//! Command-line front end. Every artifact goes under `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate_suite, parse_csv, plot_json, text_table, write_reports};
use crate::interaction::{params_io, synthetic_interaction_set, train, BgnnParams, FEATURE_DIM};
use crate::pipeline::{Pipeline, SceneAnalysis};
use crate::reasoner::{render_trace, DecisionTrace};
use crate::scenario::{generate_suite, read_manifest, ScenarioSpec, Template};
use crate::scene::io::{read_scene, write_scene, CloudFormat};
use crate::scene::Scene;

#[derive(Debug, Parser)]
#[command(name = "riskcot", version, about = "LiDAR scene risk assessment and traced driving decisions")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline config JSON; falls back to $PRIME_CONFIG, then built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the config seed (network init and Monte Carlo sampling; base
    /// scene seed for `generate`, data seed for `train-bgnn`).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ascii,
    Binary,
}

impl From<Format> for CloudFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ascii => CloudFormat::Ascii,
            Format::Binary => CloudFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene JSON file.
    #[arg(long, value_name = "FILE")]
    pub scene: PathBuf,
    /// Use the objects stored in the scene instead of running the detector.
    #[arg(long)]
    pub use_scene_objects: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scenario suite and its manifest.
    Generate {
        /// Templates, comma separated; all when omitted.
        #[arg(long, value_delimiter = ',', value_name = "NAME")]
        template: Vec<Template>,
        /// Scenes per template.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
    },
    /// Run the detector and write the scene with its detections.
    Detect {
        #[arg(long, value_name = "FILE")]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
    },
    /// Write per-object uncertainty and risk assessments.
    Assess(SceneArgs),
    /// Write the interaction graph.
    Graph(SceneArgs),
    /// Write the decision trace JSON.
    Reason(SceneArgs),
    /// Render the numbered reasoning steps as text.
    Trace {
        /// Scene to run; alternative to --trace.
        #[arg(long, value_name = "FILE", conflicts_with = "trace", required_unless_present = "trace")]
        scene: Option<PathBuf>,
        /// Existing trace JSON written by `reason`.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        #[arg(long)]
        use_scene_objects: bool,
    },
    /// Train the interaction network on the synthetic Yield/Ignore set.
    TrainBgnn {
        /// Number of synthetic graphs.
        #[arg(long, default_value_t = 64)]
        graphs: usize,
        /// Overrides `training.steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Evaluate a generated suite and write reports.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Rebuild the text table and plot JSON from a metrics CSV.
    Report {
        #[arg(long, value_name = "FILE")]
        metrics: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on runtime failure, 2 on bad usage.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::resolve(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    Ok(&common.out)
}

fn analyze(pipeline: &Pipeline, scene_path: &Path, use_scene_objects: bool) -> Result<(Scene, SceneAnalysis)> {
    let scene = read_scene(scene_path)?;
    if use_scene_objects {
        let s = pipeline.prepare(&scene)?;
        let a = pipeline.analyze(&s)?;
        Ok((s, a))
    } else {
        pipeline.run(&scene)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scene".into(), |s| s.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    graphs: usize,
    steps: usize,
    accuracy: f64,
    losses: &'a [f64],
    params: String,
}

fn execute(cli: &Cli) -> Result<i32> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    match &cli.command {
        Command::Generate {
            template,
            count,
            format,
        } => {
            let templates = if template.is_empty() {
                Template::ALL.to_vec()
            } else {
                template.clone()
            };
            let s = cfg.scenario;
            let base = ScenarioSpec {
                n_objects: s.n_objects,
                noise: s.noise,
                points_per_m2: s.points_per_m2,
                ..ScenarioSpec::new(templates[0], 0)
            };
            let dir = out_dir(common)?;
            let (path, manifest) = generate_suite(&templates, *count, cfg.seed, &base, dir, (*format).into())?;
            println!("{} scenes, manifest {}", manifest.scenes.len(), path.display());
        }
        Command::Detect { scene, format } => {
            let pipeline = Pipeline::new(cfg)?;
            let detected = pipeline.detect(&read_scene(scene)?)?;
            let dir = out_dir(common)?;
            let path = write_scene(dir, &format!("{}_detected", stem(scene)), &detected, (*format).into())?;
            println!("{} objects, {}", detected.objects.len(), path.display());
        }
        Command::Assess(a) => {
            let pipeline = Pipeline::new(cfg)?;
            let (_, analysis) = analyze(&pipeline, &a.scene, a.use_scene_objects)?;
            let path = out_dir(common)?.join("assessments.json");
            write_json(&path, &analysis.assessments)?;
            println!("{} assessments, {}", analysis.assessments.len(), path.display());
        }
        Command::Graph(a) => {
            let pipeline = Pipeline::new(cfg)?;
            let (_, analysis) = analyze(&pipeline, &a.scene, a.use_scene_objects)?;
            let path = out_dir(common)?.join("graph.json");
            write_json(&path, &analysis.graph)?;
            println!(
                "{} nodes, {} edges, {}",
                analysis.graph.nodes.len(),
                analysis.graph.edges.len(),
                path.display()
            );
        }
        Command::Reason(a) => {
            let pipeline = Pipeline::new(cfg)?;
            let (_, analysis) = analyze(&pipeline, &a.scene, a.use_scene_objects)?;
            let path = out_dir(common)?.join("trace.json");
            write_json(&path, &analysis.trace)?;
            println!("{}", analysis.trace.explanation);
        }
        Command::Trace {
            scene,
            trace,
            use_scene_objects,
        } => {
            let t: DecisionTrace = match (scene, trace) {
                (_, Some(path)) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?
                }
                (Some(scene), None) => analyze(&Pipeline::new(cfg)?, scene, *use_scene_objects)?.1.trace,
                (None, None) => return Err(Error::Config("trace needs --scene or --trace".into())),
            };
            let text = render_trace(&t);
            write_text(&out_dir(common)?.join("trace.txt"), &text)?;
            print!("{text}");
        }
        Command::TrainBgnn { graphs, steps } => {
            let mut tcfg = cfg.training;
            if let Some(s) = steps {
                tcfg.steps = *s;
            }
            let data = synthetic_interaction_set(*graphs, cfg.seed);
            let mut params = BgnnParams::init(FEATURE_DIM, &cfg.interaction, cfg.seed);
            let report = train(&mut params, &data, &tcfg, cfg.interaction.prior_std)?;
            let dir = out_dir(common)?;
            let path = dir.join("bgnn.params");
            params_io::write_params(&path, &params, &cfg.interaction)?;
            write_json(
                &dir.join("training.json"),
                &TrainingSummary {
                    graphs: *graphs,
                    steps: tcfg.steps,
                    accuracy: report.accuracy,
                    losses: &report.losses,
                    params: "bgnn.params".into(),
                },
            )?;
            println!(
                "training accuracy {:.3}, final loss {:.4}, {}",
                report.accuracy,
                report.losses.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::Evaluate { manifest, jobs } => {
            let pipeline = Pipeline::new(cfg)?;
            let m = read_manifest(manifest)?;
            let (result, outcomes) = evaluate_suite(manifest, &m, &pipeline, *jobs)?;
            write_reports(out_dir(common)?, &result, Some(&outcomes))?;
            print!("{}", text_table(&result));
            if result.errors > 0 {
                for o in outcomes.iter().filter(|o| o.error.is_some()) {
                    eprintln!("error: {}: {}", o.scene, o.error.as_deref().unwrap_or_default());
                }
                return Ok(1);
            }
        }
        Command::Report { metrics } => {
            let text = fs::read_to_string(metrics).map_err(|e| Error::io(metrics, e))?;
            let result = parse_csv(&text)?;
            let dir = out_dir(common)?;
            let table = text_table(&result);
            write_text(&dir.join("table.txt"), &table)?;
            let plot = serde_json::to_string_pretty(&plot_json(&result))? + "\n";
            write_text(&dir.join("plot.json"), &plot)?;
            print!("{table}");
        }
    }
    Ok(0)
}
