//! Semantic-judgment providers.
//!
//! Every judgment the pipeline needs (step summaries, unexercised
//! affordances, action templates, context names, tacit knowledge) goes
//! through one request/response contract. [`HeuristicAnnotator`] answers
//! offline with fixed rules; [`RemoteAnnotator`] posts the request as JSON
//! to an HTTP endpoint.

mod heuristic;
mod remote;

use std::collections::HashSet;
use std::env;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ActionType, DomSnapshot, RawEvent};

pub use heuristic::{induce_template, potential_verb, HeuristicAnnotator};
pub use remote::{RemoteAnnotator, RemoteConfig};

pub const ENV_ANNOTATOR: &str = "ENVMAP_ANNOTATOR";
pub const ENV_ENDPOINT: &str = "ENVMAP_ANNOTATOR_ENDPOINT";
pub const ENV_KEY: &str = "ENVMAP_ANNOTATOR_KEY";
pub const ENV_MAX_IN_FLIGHT: &str = "ENVMAP_ANNOTATOR_MAX_IN_FLIGHT";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum AnnotationRequest {
    SummarizeStep(StepWindow),
    ProposePotentialActions(PotentialRequest),
    InduceTemplate(TemplateRequest),
    DescribeContext(ContextRequest),
    ExtractKnowledge(KnowledgeRequest),
}

/// One action event with the narration preceding it and the URL after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWindow {
    pub narration: Vec<String>,
    pub event: RawEvent,
    pub next_url: Option<String>,
    pub snapshot_excerpt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TakenRef {
    pub selector: Option<String>,
    pub text: Option<String>,
}

impl TakenRef {
    /// Present components must all agree; a ref with no components matches nothing.
    pub fn covers(&self, element_id: &str, text: &str) -> bool {
        if self.selector.is_none() && self.text.is_none() {
            return false;
        }
        self.selector.as_deref().is_none_or(|s| s == element_id)
            && self.text.as_deref().is_none_or(|t| t == text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialRequest {
    pub snapshot: DomSnapshot,
    pub taken: Vec<TakenRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRequest {
    pub verb: ActionType,
    pub element_role: Option<String>,
    /// Raw action names, one per instance, in instance-ID order.
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRequest {
    pub environment: String,
    pub pattern: String,
    pub page_excerpt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeStep {
    pub step_number: u32,
    pub name: String,
    pub context_id: Option<String>,
    pub action_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeWorkflow {
    pub workflow_id: String,
    pub steps: Vec<KnowledgeStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeContext {
    pub context_id: String,
    pub name: String,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeRequest {
    pub workflows: Vec<KnowledgeWorkflow>,
    pub contexts: Vec<KnowledgeContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "snake_case")]
pub enum AnnotationResponse {
    SummarizeStep(StepSummary),
    ProposePotentialActions(PotentialActions),
    InduceTemplate(TemplateInduction),
    DescribeContext(ContextDescription),
    ExtractKnowledge(KnowledgeProposal),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSummary {
    pub name: String,
    pub description: String,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialProposal {
    pub element_id: String,
    pub name: String,
    pub description: String,
    pub expected_outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotentialActions {
    pub actions: Vec<PotentialProposal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateInduction {
    pub template: String,
    pub parameter_name: Option<String>,
    /// One value per request instance, same order. Empty when unparameterized.
    pub bindings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDescription {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedDefinition {
    pub term: String,
    pub meaning: String,
    #[serde(default)]
    pub related_context_ids: Vec<String>,
    #[serde(default)]
    pub related_action_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProposedStep {
    pub action_id: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedProcedure {
    pub goal: String,
    pub context_id: String,
    pub action_sequence: Vec<ProposedStep>,
    #[serde(default)]
    pub source_workflows: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeProposal {
    pub definitions: Vec<ProposedDefinition>,
    pub procedures: Vec<ProposedProcedure>,
}

impl AnnotationRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            AnnotationRequest::SummarizeStep(_) => "summarize_step",
            AnnotationRequest::ProposePotentialActions(_) => "propose_potential_actions",
            AnnotationRequest::InduceTemplate(_) => "induce_template",
            AnnotationRequest::DescribeContext(_) => "describe_context",
            AnnotationRequest::ExtractKnowledge(_) => "extract_knowledge",
        }
    }
}

impl AnnotationResponse {
    pub fn kind(&self) -> &'static str {
        match self {
            AnnotationResponse::SummarizeStep(_) => "summarize_step",
            AnnotationResponse::ProposePotentialActions(_) => "propose_potential_actions",
            AnnotationResponse::InduceTemplate(_) => "induce_template",
            AnnotationResponse::DescribeContext(_) => "describe_context",
            AnnotationResponse::ExtractKnowledge(_) => "extract_knowledge",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotatorError {
    #[error("annotator unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("annotator returned an invalid response: {0}")]
    InvalidResponse(String),
    #[error("annotator misconfigured: {0}")]
    Config(String),
}

pub trait Annotator: Send + Sync {
    /// Short provider name recorded in map metadata.
    fn kind(&self) -> &'static str;
    fn annotate(&self, req: &AnnotationRequest) -> Result<AnnotationResponse, AnnotatorError>;
}

fn is_param_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Checks a response against its request: matching kind plus the per-kind
/// invariants the pipeline relies on.
pub fn validate_response(
    req: &AnnotationRequest,
    resp: &AnnotationResponse,
) -> Result<(), AnnotatorError> {
    let invalid = |msg: String| Err(AnnotatorError::InvalidResponse(msg));
    if req.kind() != resp.kind() {
        return invalid(format!(
            "{} response to a {} request",
            resp.kind(),
            req.kind()
        ));
    }
    match (req, resp) {
        (AnnotationRequest::SummarizeStep(_), AnnotationResponse::SummarizeStep(s)) => {
            if s.name.trim().is_empty() {
                return invalid("empty step name".into());
            }
        }
        (
            AnnotationRequest::ProposePotentialActions(r),
            AnnotationResponse::ProposePotentialActions(p),
        ) => {
            let interactable: HashSet<&str> = r
                .snapshot
                .elements
                .iter()
                .filter(|e| e.interactable)
                .map(|e| e.element_id.as_str())
                .collect();
            let mut seen = HashSet::new();
            for a in &p.actions {
                if !interactable.contains(a.element_id.as_str()) {
                    return invalid(format!("{:?} is not an interactable element", a.element_id));
                }
                if !seen.insert(a.element_id.as_str()) {
                    return invalid(format!("{:?} proposed twice", a.element_id));
                }
                if a.name.trim().is_empty() {
                    return invalid("empty action name".into());
                }
            }
        }
        (AnnotationRequest::InduceTemplate(r), AnnotationResponse::InduceTemplate(t)) => {
            check_template(r, t).or_else(invalid)?;
        }
        (AnnotationRequest::DescribeContext(_), AnnotationResponse::DescribeContext(d)) => {
            if d.name.trim().is_empty() {
                return invalid("empty context name".into());
            }
        }
        (AnnotationRequest::ExtractKnowledge(_), AnnotationResponse::ExtractKnowledge(_)) => {}
        _ => unreachable!("kinds already compared"),
    }
    Ok(())
}

fn check_template(r: &TemplateRequest, t: &TemplateInduction) -> Result<(), String> {
    let Some(param) = &t.parameter_name else {
        if !t.bindings.is_empty() {
            return Err("bindings without a parameter".into());
        }
        if let Some(other) = r.instances.iter().find(|i| **i != t.template) {
            return Err(format!("{other:?} differs from unparameterized template"));
        }
        return Ok(());
    };
    if !is_param_name(param) {
        return Err(format!("bad parameter name {param:?}"));
    }
    let placeholder = format!("{{{param}}}");
    if t.template.matches(&placeholder).count() != 1 {
        return Err(format!("template must contain {placeholder} exactly once"));
    }
    if t.bindings.len() != r.instances.len() {
        return Err(format!(
            "{} bindings for {} instances",
            t.bindings.len(),
            r.instances.len()
        ));
    }
    for (inst, value) in r.instances.iter().zip(&t.bindings) {
        if t.template.replacen(&placeholder, value, 1) != *inst {
            return Err(format!("binding {value:?} does not reproduce {inst:?}"));
        }
    }
    Ok(())
}

/// Asks `ann`, substituting the heuristic answer when the provider fails or
/// replies with something that breaks the response invariants.
pub fn annotate_or_fallback(ann: &dyn Annotator, req: &AnnotationRequest) -> AnnotationResponse {
    let outcome = ann
        .annotate(req)
        .and_then(|resp| validate_response(req, &resp).map(|_| resp));
    match outcome {
        Ok(resp) => resp,
        Err(e) => {
            log::warn!(
                "{} annotator failed on {}: {e}; using heuristic",
                ann.kind(),
                req.kind()
            );
            HeuristicAnnotator
                .annotate(req)
                .expect("heuristic annotator is total")
        }
    }
}

/// Builds the provider named by `choice`, or by `ENVMAP_ANNOTATOR` when
/// `choice` is `None`. Defaults to the heuristic.
pub fn annotator_from_env(choice: Option<&str>) -> Result<Box<dyn Annotator>, AnnotatorError> {
    let from_env = env::var(ENV_ANNOTATOR).ok();
    let name = choice
        .map(str::to_string)
        .or(from_env)
        .unwrap_or_else(|| "heuristic".to_string());
    match name.trim() {
        "" | "heuristic" => Ok(Box::new(HeuristicAnnotator)),
        "remote" => {
            let endpoint = env::var(ENV_ENDPOINT)
                .map_err(|_| AnnotatorError::Config(format!("{ENV_ENDPOINT} is not set")))?;
            let mut config = RemoteConfig::new(endpoint);
            config.api_key = env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
            if let Ok(v) = env::var(ENV_MAX_IN_FLIGHT) {
                config.max_in_flight =
                    v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                        AnnotatorError::Config(format!("{ENV_MAX_IN_FLIGHT}={v:?}"))
                    })?;
            }
            Ok(Box::new(RemoteAnnotator::new(config)?))
        }
        other => Err(AnnotatorError::Config(format!(
            "unknown annotator {other:?} (expected heuristic or remote)"
        ))),
    }
}
