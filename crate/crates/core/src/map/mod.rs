//! Environment-map domain types.
//!
//! A map holds contexts (each with its parameterized actions), workflows,
//! tacit knowledge, statistics, and metadata. All collections are kept in
//! canonical order (sorted by ID) so serialization is byte-deterministic.

mod io;
mod validate;

use serde::{Deserialize, Serialize};

use crate::ids;
use crate::trace::ActionType;

pub use io::{deserialize_map, render_map, serialize_map, MapIoError, MAP_FILE};
pub use validate::{validate_map, MapViolation};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub step_number: u32,
    pub name: String,
    pub description: String,
    pub outcome: String,
    pub url: String,
    pub context_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Workflow {
    pub workflow_id: String,
    pub task_id: String,
    pub steps: Vec<Step>,
    pub mesh_path: String,
}

impl Workflow {
    pub fn mesh_path_for(workflow_id: &str) -> String {
        format!("workflows/{workflow_id}.json")
    }
}

/// Link from a map entity back to its source recording.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_number: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_id: Option<String>,
}

/// An extracted, not yet generalized action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAction {
    pub instance_id: String,
    pub name: String,
    pub description: String,
    pub expected_outcome: String,
    pub taken: bool,
    pub url: String,
    pub verb: ActionType,
    pub element_role: Option<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionInstance {
    #[serde(rename = "action_id")]
    pub instance_id: String,
    pub is_taken: bool,
    pub action_description: String,
    pub provenance: Provenance,
}

/// Serialized field order follows the detailed context file layout.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterizedAction {
    #[serde(rename = "action")]
    pub template: String,
    pub action_id: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "is_parameterized")]
    pub parameterized: bool,
    pub parameter_name: Option<String>,
    pub possible_values: Vec<String>,
    pub instances: Vec<ActionInstance>,
}

impl ParameterizedAction {
    pub const KIND_GENERALIZED: &'static str = "generalized";

    pub fn has_taken(&self) -> bool {
        self.instances.iter().any(|i| i.is_taken)
    }

    /// Placeholder text, e.g. `{link_text}`, when parameterized.
    pub fn placeholder(&self) -> Option<String> {
        self.parameter_name.as_ref().map(|p| format!("{{{p}}}"))
    }

    /// Value that instantiates the template as `description`, if any.
    pub fn binding_for<'d>(&self, description: &'d str) -> Option<&'d str> {
        let placeholder = self.placeholder()?;
        let (pre, post) = self.template.split_once(&placeholder)?;
        if description.len() < pre.len() + post.len() {
            return None;
        }
        description.strip_prefix(pre)?.strip_suffix(post)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub context_id: String,
    pub name: String,
    pub description: String,
    pub pattern: String,
    pub actions: Vec<ParameterizedAction>,
    pub action_count: usize,
    pub contributing_recordings: Vec<String>,
    pub mesh_path: String,
}

impl Context {
    pub fn mesh_path_for(context_id: &str) -> String {
        format!("contexts/{context_id}.json")
    }

    pub fn instance_count(&self) -> usize {
        self.actions.iter().map(|a| a.instances.len()).sum()
    }

    pub fn recordings(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .actions
            .iter()
            .flat_map(|a| a.instances.iter().map(|i| i.provenance.task_id.clone()))
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn action(&self, action_id: &str) -> Option<&ParameterizedAction> {
        self.actions.iter().find(|a| a.action_id == action_id)
    }
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeOrigin {
    /// Recomputed from workflows whenever maps are assembled or merged.
    Mined,
    /// Returned by a semantic annotator.
    Annotated,
    #[default]
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Definition {
    pub id: String,
    pub term: String,
    pub meaning: String,
    #[serde(default)]
    pub related_context_ids: Vec<String>,
    #[serde(default)]
    pub related_action_ids: Vec<String>,
    #[serde(default)]
    pub origin: KnowledgeOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureStep {
    pub action_id: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Procedure {
    pub id: String,
    pub goal: String,
    pub context_id: String,
    pub action_sequence: Vec<ProcedureStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_workflows: Vec<String>,
    #[serde(default)]
    pub origin: KnowledgeOrigin,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TacitKnowledge {
    pub definitions: Vec<Definition>,
    pub procedures: Vec<Procedure>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Statistics {
    pub num_steps: usize,
    pub pages_identified: usize,
    pub actions_extracted: usize,
    pub recordings_processed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub created_at: String,
    pub pipeline_version: String,
    pub annotator_kind: String,
}

impl Metadata {
    pub const DEFAULT_CREATED_AT: &'static str = "1970-01-01T00:00:00Z";

    pub fn new(created_at: impl Into<String>, annotator_kind: impl Into<String>) -> Self {
        Self {
            created_at: created_at.into(),
            pipeline_version: crate::PIPELINE_VERSION.to_string(),
            annotator_kind: annotator_kind.into(),
        }
    }

    /// Annotator kinds as a set; merged maps join kinds with `+`.
    pub fn annotator_kinds(&self) -> Vec<&str> {
        let mut kinds: Vec<&str> = self
            .annotator_kind
            .split('+')
            .filter(|k| !k.is_empty())
            .collect();
        kinds.sort_unstable();
        kinds.dedup();
        kinds
    }

    /// Commutative, associative, idempotent combination.
    pub fn combine(&self, other: &Metadata) -> Metadata {
        let mut kinds = self.annotator_kinds();
        kinds.extend(other.annotator_kinds());
        kinds.sort_unstable();
        kinds.dedup();
        Metadata {
            created_at: self.created_at.clone().max(other.created_at.clone()),
            pipeline_version: self
                .pipeline_version
                .clone()
                .max(other.pipeline_version.clone()),
            annotator_kind: kinds.join("+"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentMap {
    pub id: String,
    pub name: String,
    pub description: String,
    pub base_url: String,
    pub contexts: Vec<Context>,
    pub workflows: Vec<Workflow>,
    pub tacit_knowledge: TacitKnowledge,
    pub statistics: Statistics,
    pub metadata: Metadata,
}

impl EnvironmentMap {
    /// A map with no contents for `env`; the identity element of merging.
    pub fn empty(env: &str, base_url: &str, metadata: Metadata) -> Self {
        let mut m = EnvironmentMap {
            id: ids::map_id(env),
            name: default_map_name(env),
            description: String::new(),
            base_url: base_url.to_string(),
            contexts: Vec::new(),
            workflows: Vec::new(),
            tacit_knowledge: TacitKnowledge::default(),
            statistics: Statistics::default(),
            metadata,
        };
        m.description = default_map_description(&m);
        m
    }

    /// Environment name encoded in the map ID.
    pub fn environment(&self) -> &str {
        self.id.strip_prefix("env-map-").unwrap_or(&self.id)
    }

    pub fn context(&self, context_id: &str) -> Option<&Context> {
        self.contexts.iter().find(|c| c.context_id == context_id)
    }

    pub fn context_by_pattern(&self, pattern: &str) -> Option<&Context> {
        self.contexts.iter().find(|c| c.pattern == pattern)
    }

    pub fn workflow(&self, workflow_id: &str) -> Option<&Workflow> {
        self.workflows.iter().find(|w| w.workflow_id == workflow_id)
    }

    /// The action containing `instance_id`, with its context.
    pub fn action_for_instance(
        &self,
        instance_id: &str,
    ) -> Option<(&Context, &ParameterizedAction)> {
        self.contexts.iter().find_map(|c| {
            c.actions
                .iter()
                .find(|a| a.instances.iter().any(|i| i.instance_id == instance_id))
                .map(|a| (c, a))
        })
    }

    pub fn action(&self, action_id: &str) -> Option<(&Context, &ParameterizedAction)> {
        self.contexts
            .iter()
            .find_map(|c| c.action(action_id).map(|a| (c, a)))
    }

    pub fn compute_statistics(&self) -> Statistics {
        compute_statistics(self)
    }
}

pub fn default_map_name(env: &str) -> String {
    let mut chars = env.chars();
    let title = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect::<String>(),
        None => String::new(),
    };
    format!("{title} Environment Map")
}

pub fn default_map_description(m: &EnvironmentMap) -> String {
    format!(
        "Environment map merged from {} {} recordings",
        compute_statistics(m).recordings_processed,
        m.environment()
    )
}

/// Totals over a map: steps, contexts, action instances, distinct recordings.
pub fn compute_statistics(m: &EnvironmentMap) -> Statistics {
    let mut tasks: Vec<&str> = m
        .contexts
        .iter()
        .flat_map(|c| c.actions.iter())
        .flat_map(|a| a.instances.iter())
        .map(|i| i.provenance.task_id.as_str())
        .collect();
    tasks.sort_unstable();
    tasks.dedup();
    Statistics {
        num_steps: m.workflows.iter().map(|w| w.steps.len()).sum(),
        pages_identified: m.contexts.len(),
        actions_extracted: m.contexts.iter().map(|c| c.action_count).sum(),
        recordings_processed: tasks.len(),
    }
}
