//! `envmap`: build, merge, query, and export environment maps.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 empty input,
//! 3 unknown ID. Result records go to stdout one JSON object per line;
//! diagnostics go to stderr.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context as _};
use clap::{Args, Parser, Subcommand};
use envmap::annotator::{annotator_from_env, Annotator};
use envmap::map::{deserialize_map, serialize_map, validate_map, EnvironmentMap};
use envmap::nav_metrics::{compute_metrics, parse_har};
use envmap::pipeline::consolidate;
use envmap::query::{self, ActionFilter};
use envmap::trace::{filter_accessibility_tree, parse_trajectory, FilterLimits, Trajectory};
use envmap::viz::{export_graph, ExportFormat, ExportOptions};
use envmap::{Normalizer, Pipeline};
use rayon::prelude::*;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "envmap",
    version,
    about = "Compile interaction trajectories into environment maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a map from a directory of trajectory files.
    Build(BuildArgs),
    /// Merge two or more maps of the same environment.
    Merge(MergeArgs),
    /// Look up contexts, actions, workflows, or terms in a map.
    Query(QueryArgs),
    /// Export a map as a graph.
    Export(ExportArgs),
    /// Navigation metrics of a HAR log.
    Metrics(MetricsArgs),
    /// Print the statistics block of a map.
    Stats(MapArg),
    /// Filter a serialized accessibility tree.
    FilterTree(FilterTreeArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Directory of trajectory files.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    env_name: String,
    #[arg(long)]
    base_url: String,
    /// URL normalization rules (`priority<TAB>pattern<TAB>replacement`).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// `heuristic` or `remote`; defaults to ENVMAP_ANNOTATOR, then heuristic.
    #[arg(long)]
    annotator: Option<String>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true, num_args = 2..)]
    maps: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    annotator: Option<String>,
}

#[derive(Args)]
struct MapArg {
    #[arg(long)]
    map: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[command(subcommand)]
    query: Query,
}

#[derive(Subcommand)]
enum Query {
    /// The context whose pattern matches a URL.
    Context {
        #[arg(long)]
        url: String,
    },
    /// Actions of one context.
    Actions {
        #[arg(long)]
        context: String,
        #[arg(long, default_value_t = ActionFilter::All)]
        filter: ActionFilter,
    },
    /// Workflows ranked by keyword matches.
    Workflows { keywords: Vec<String> },
    /// Definitions of a term.
    Term { term: String },
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, default_value = "dot")]
    format: ExportFormat,
    #[arg(long)]
    max_contexts: Option<usize>,
    #[arg(long)]
    max_actions_per_context: Option<usize>,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    har: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct FilterTreeArgs {
    /// Tree file; stdin when absent.
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    sibling_limit: usize,
    #[arg(long, default_value_t = 150)]
    text_limit: usize,
    #[arg(long, default_value_t = 20_000)]
    char_cap: usize,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: 1,
            error: e.into(),
        }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Query(a) => cmd_query(a),
        Command::Export(a) => cmd_export(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Stats(a) => cmd_stats(a),
        Command::FilterTree(a) => cmd_filter_tree(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn emit(records: impl IntoIterator<Item = Value>) -> CmdResult {
    let mut out = io::stdout().lock();
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

fn normalizer(rules: Option<&Path>) -> anyhow::Result<Normalizer> {
    let Some(path) = rules else {
        return Ok(Normalizer::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Normalizer::from_rules_text(&text).with_context(|| format!("rules file {}", path.display()))
}

fn annotator(choice: Option<&str>) -> anyhow::Result<Arc<dyn Annotator>> {
    Ok(Arc::from(annotator_from_env(choice)?))
}

fn load_map(dir: &Path) -> anyhow::Result<EnvironmentMap> {
    let m = deserialize_map(dir).with_context(|| format!("loading map {}", dir.display()))?;
    let violations = validate_map(&m);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(anyhow!(
            "map {} is invalid: {}",
            dir.display(),
            list.join("; ")
        ));
    }
    Ok(m)
}

fn trace_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if entry.file_type()?.is_file() && !hidden {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

fn cmd_build(a: BuildArgs) -> CmdResult {
    let files = trace_files(&a.traces)?;
    if files.is_empty() {
        return Err(fail(
            2,
            anyhow!("no trajectory files in {}", a.traces.display()),
        ));
    }
    let trajectories = files
        .par_iter()
        .map(|path| {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_trajectory(&text).with_context(|| format!("parsing {}", path.display()))
        })
        .collect::<anyhow::Result<Vec<Trajectory>>>()?;

    let pipeline = Pipeline::new(&a.env_name, &a.base_url)
        .with_normalizer(normalizer(a.rules.as_deref())?)
        .with_annotator(annotator(a.annotator.as_deref())?);
    let parts = trajectories
        .par_iter()
        .map(|t| {
            pipeline
                .trajectory_part(t)
                .with_context(|| format!("task {}", t.task_id))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (map, report) = pipeline.finish(parts, &trajectories)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    serialize_map(&map, &a.out)?;
    emit([serde_json::to_value(map.statistics)?])
}

fn cmd_merge(a: MergeArgs) -> CmdResult {
    let mut maps = a
        .maps
        .iter()
        .map(|d| load_map(d))
        .collect::<anyhow::Result<Vec<_>>>()?
        .into_iter();
    let first = maps.next().expect("clap enforces two maps");
    let ann = annotator(a.annotator.as_deref())?;
    let merged = consolidate(first, maps, ann.as_ref())?;
    serialize_map(&merged, &a.out)?;
    emit([serde_json::to_value(merged.statistics)?])
}

fn context_record(c: &envmap::map::Context) -> Value {
    json!({
        "context_id": c.context_id,
        "name": c.name,
        "description": c.description,
        "pattern": c.pattern,
        "action_count": c.action_count,
        "contributing_recordings": c.contributing_recordings,
    })
}

fn cmd_query(a: QueryArgs) -> CmdResult {
    let m = load_map(&a.map)?;
    match a.query {
        Query::Context { url } => {
            let n = normalizer(a.rules.as_deref())?;
            let hit = query::resolve_context(&m, &url, &n)?;
            emit(hit.map(context_record))
        }
        Query::Actions { context, filter } => {
            let actions =
                query::list_actions(&m, &context, filter).map_err(|e| fail(3, e.into()))?;
            emit(actions.into_iter().map(|act| {
                json!({
                    "action_id": act.action_id,
                    "action": act.template,
                    "is_parameterized": act.parameterized,
                    "parameter_name": act.parameter_name,
                    "possible_values": act.possible_values,
                    "taken": act.has_taken(),
                    "instances": act.instances.len(),
                })
            }))
        }
        Query::Workflows { keywords } => {
            emit(query::find_workflows(&m, &keywords).into_iter().map(|h| {
                json!({
                    "workflow_id": h.workflow.workflow_id,
                    "task_id": h.workflow.task_id,
                    "score": h.score,
                    "steps": h.workflow.steps.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(),
                })
            }))
        }
        Query::Term { term } => emit(query::lookup_term(&m, &term).into_iter().map(|h| {
            json!({
                "id": h.definition.id,
                "term": h.definition.term,
                "meaning": h.definition.meaning,
                "contexts": h.contexts.iter().map(|c| c.context_id.as_str()).collect::<Vec<_>>(),
                "actions": h.actions.iter().map(|a| a.action_id.as_str()).collect::<Vec<_>>(),
            })
        })),
    }
}

fn cmd_export(a: ExportArgs) -> CmdResult {
    let m = load_map(&a.map)?;
    let opts = ExportOptions {
        max_contexts: a.max_contexts,
        max_actions_per_context: a.max_actions_per_context,
    };
    let text = export_graph(&m, a.format, opts)?;
    match a.out {
        Some(path) => {
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_metrics(a: MetricsArgs) -> CmdResult {
    let text =
        fs::read_to_string(&a.har).with_context(|| format!("reading {}", a.har.display()))?;
    let entries = parse_har(&text).with_context(|| a.har.display().to_string())?;
    let metrics = compute_metrics(&entries, &normalizer(a.rules.as_deref())?);
    emit([serde_json::to_value(metrics)?])
}

fn cmd_stats(a: MapArg) -> CmdResult {
    let m = load_map(&a.map)?;
    emit([serde_json::to_value(m.statistics)?])
}

fn cmd_filter_tree(a: FilterTreeArgs) -> CmdResult {
    let tree = match &a.input {
        Some(path) => {
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    let limits = FilterLimits {
        sibling_limit: a.sibling_limit,
        text_limit: a.text_limit,
        char_cap: a.char_cap,
    };
    let mut out = filter_accessibility_tree(&tree, limits);
    out.push('\n');
    io::stdout().lock().write_all(out.as_bytes())?;
    Ok(())
}
