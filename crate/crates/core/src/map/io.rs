//! On-disk layout:
//!
//! ```text
//! <dir>/map.json                          top-level map
//! <dir>/contexts/<context_id>.json        one detailed file per context
//! <dir>/workflows/<workflow_id>.json      one detailed file per workflow
//! ```
//!
//! Files are UTF-8 JSON with two-space indentation, LF line endings, and a
//! trailing newline. Keys are written in schema order.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Component, Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate_map, Context, EnvironmentMap, MapViolation, Metadata, ParameterizedAction, Statistics,
    Step, TacitKnowledge, Workflow,
};

pub const MAP_FILE: &str = "map.json";

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("map is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMap(Vec<MapViolation>),
    #[error("{}: schema violation at `{field}`: {message}", path.display())]
    SchemaViolation {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("detail file for {0} is missing")]
    DanglingMeshPath(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MapIoError + '_ {
    move |source| MapIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    id: String,
    name: String,
    description: String,
    base_url: String,
    page_contexts: Vec<ContextSummary>,
    workflows: Vec<WorkflowRef>,
    tacit_knowledge: TacitKnowledge,
    statistics: Statistics,
    metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextSummary {
    context_id: String,
    name: String,
    description: String,
    pattern: String,
    context_mesh_path: String,
    action_count: usize,
    contributing_recordings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkflowRef {
    workflow_id: String,
    workflow_mesh_path: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextFile {
    id: String,
    pattern: String,
    available_actions: Vec<ParameterizedAction>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkflowFile {
    workflow_id: String,
    task_id: String,
    steps: Vec<Step>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("map records serialize");
    s.push('\n');
    s
}

/// Renders every file of the map as `(relative path, contents)`, in path order.
pub fn render_map(m: &EnvironmentMap) -> BTreeMap<PathBuf, String> {
    let mut files = BTreeMap::new();
    let top = MapFile {
        id: m.id.clone(),
        name: m.name.clone(),
        description: m.description.clone(),
        base_url: m.base_url.clone(),
        page_contexts: m
            .contexts
            .iter()
            .map(|c| ContextSummary {
                context_id: c.context_id.clone(),
                name: c.name.clone(),
                description: c.description.clone(),
                pattern: c.pattern.clone(),
                context_mesh_path: c.mesh_path.clone(),
                action_count: c.action_count,
                contributing_recordings: c.contributing_recordings.clone(),
            })
            .collect(),
        workflows: m
            .workflows
            .iter()
            .map(|w| WorkflowRef {
                workflow_id: w.workflow_id.clone(),
                workflow_mesh_path: w.mesh_path.clone(),
            })
            .collect(),
        tacit_knowledge: m.tacit_knowledge.clone(),
        statistics: m.statistics,
        metadata: m.metadata.clone(),
    };
    files.insert(PathBuf::from(MAP_FILE), to_json(&top));
    for c in &m.contexts {
        let file = ContextFile {
            id: c.context_id.clone(),
            pattern: c.pattern.clone(),
            available_actions: c.actions.clone(),
        };
        files.insert(PathBuf::from(&c.mesh_path), to_json(&file));
    }
    for w in &m.workflows {
        let file = WorkflowFile {
            workflow_id: w.workflow_id.clone(),
            task_id: w.task_id.clone(),
            steps: w.steps.clone(),
        };
        files.insert(PathBuf::from(&w.mesh_path), to_json(&file));
    }
    files
}

/// Writes the map under `out_dir`, replacing any previous contents.
///
/// Files are staged in a sibling temporary directory and moved into place,
/// so `out_dir` ends up either complete or untouched.
pub fn serialize_map(m: &EnvironmentMap, out_dir: &Path) -> Result<(), MapIoError> {
    let violations = validate_map(m);
    if !violations.is_empty() {
        return Err(MapIoError::InvalidMap(violations));
    }
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".envmap-staging-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))?;
    for (rel, contents) in render_map(m) {
        let path = staging.path().join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, contents).map_err(io_err(&out_dir.join(&rel)))?;
    }

    let staged = staging.keep();
    let backup = if out_dir.exists() {
        let backup = tempfile::Builder::new()
            .prefix(".envmap-previous-")
            .tempdir_in(&parent)
            .map_err(io_err(&parent))?
            .keep();
        fs::remove_dir(&backup).map_err(io_err(&backup))?;
        fs::rename(out_dir, &backup).map_err(io_err(out_dir))?;
        Some(backup)
    } else {
        None
    };
    if let Err(e) = fs::rename(&staged, out_dir) {
        if let Some(b) = &backup {
            let _ = fs::rename(b, out_dir);
        }
        let _ = fs::remove_dir_all(&staged);
        return Err(io_err(out_dir)(e));
    }
    if let Some(b) = backup {
        fs::remove_dir_all(&b).map_err(io_err(&b))?;
    }
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, MapIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| MapIoError::SchemaViolation {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// Relative path made only of normal components.
pub(crate) fn is_safe_mesh_path(p: &str) -> bool {
    let path = Path::new(p);
    !p.is_empty()
        && path.extension().is_some_and(|e| e == "json")
        && path.components().all(|c| matches!(c, Component::Normal(_)))
}

fn detail_path(
    dir: &Path,
    mesh_path: &str,
    owner: &str,
    top: &Path,
    field: &str,
) -> Result<PathBuf, MapIoError> {
    if !is_safe_mesh_path(mesh_path) {
        return Err(MapIoError::SchemaViolation {
            path: top.to_path_buf(),
            field: field.to_string(),
            message: format!("unsafe mesh path {mesh_path:?} for {owner}"),
        });
    }
    let path = dir.join(mesh_path);
    if !path.is_file() {
        return Err(MapIoError::DanglingMeshPath(owner.to_string()));
    }
    Ok(path)
}

/// Loads a map directory written by [`serialize_map`] (or edited by hand).
pub fn deserialize_map(dir: &Path) -> Result<EnvironmentMap, MapIoError> {
    let top_path = dir.join(MAP_FILE);
    let top: MapFile = read_json(&top_path)?;

    let mut contexts = Vec::with_capacity(top.page_contexts.len());
    for (i, summary) in top.page_contexts.into_iter().enumerate() {
        let field = format!("page_contexts[{i}].context_mesh_path");
        let path = detail_path(
            dir,
            &summary.context_mesh_path,
            &summary.context_id,
            &top_path,
            &field,
        )?;
        let file: ContextFile = read_json(&path)?;
        let mismatch = |field: &str, found: &str, expected: &str| MapIoError::SchemaViolation {
            path: path.clone(),
            field: field.to_string(),
            message: format!("{found:?} does not match {expected:?} in {MAP_FILE}"),
        };
        if file.id != summary.context_id {
            return Err(mismatch("id", &file.id, &summary.context_id));
        }
        if file.pattern != summary.pattern {
            return Err(mismatch("pattern", &file.pattern, &summary.pattern));
        }
        contexts.push(Context {
            context_id: summary.context_id,
            name: summary.name,
            description: summary.description,
            pattern: summary.pattern,
            actions: file.available_actions,
            action_count: summary.action_count,
            contributing_recordings: summary.contributing_recordings,
            mesh_path: summary.context_mesh_path,
        });
    }

    let mut workflows = Vec::with_capacity(top.workflows.len());
    for (i, r) in top.workflows.into_iter().enumerate() {
        let field = format!("workflows[{i}].workflow_mesh_path");
        let path = detail_path(
            dir,
            &r.workflow_mesh_path,
            &r.workflow_id,
            &top_path,
            &field,
        )?;
        let file: WorkflowFile = read_json(&path)?;
        if file.workflow_id != r.workflow_id {
            return Err(MapIoError::SchemaViolation {
                path,
                field: "workflow_id".into(),
                message: format!(
                    "{:?} does not match {:?} in {MAP_FILE}",
                    file.workflow_id, r.workflow_id
                ),
            });
        }
        workflows.push(Workflow {
            workflow_id: file.workflow_id,
            task_id: file.task_id,
            steps: file.steps,
            mesh_path: r.workflow_mesh_path,
        });
    }

    Ok(EnvironmentMap {
        id: top.id,
        name: top.name,
        description: top.description,
        base_url: top.base_url,
        contexts,
        workflows,
        tacit_knowledge: top.tacit_knowledge,
        statistics: top.statistics,
        metadata: top.metadata,
    })
}
