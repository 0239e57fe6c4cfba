//! Read-only lookups over a loaded map.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::map::{Context, Definition, EnvironmentMap, ParameterizedAction, Workflow};
use crate::pipeline::{NormalizeError, Normalizer};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("unknown context {0}")]
    UnknownContext(String),
}

/// The context whose pattern equals the normalized form of `url`.
pub fn resolve_context<'m>(
    m: &'m EnvironmentMap,
    url: &str,
    normalizer: &Normalizer,
) -> Result<Option<&'m Context>, NormalizeError> {
    let pattern = normalizer.normalize(url)?;
    Ok(m.context_by_pattern(&pattern))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionFilter {
    /// Actions with at least one taken instance.
    Taken,
    /// Actions that were only ever proposed, never taken.
    Potential,
    #[default]
    All,
}

impl FromStr for ActionFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "taken" => Ok(ActionFilter::Taken),
            "potential" => Ok(ActionFilter::Potential),
            "all" => Ok(ActionFilter::All),
            other => Err(format!("unknown filter {other:?} (taken, potential, all)")),
        }
    }
}

impl fmt::Display for ActionFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionFilter::Taken => "taken",
            ActionFilter::Potential => "potential",
            ActionFilter::All => "all",
        })
    }
}

pub fn list_actions<'m>(
    m: &'m EnvironmentMap,
    context_id: &str,
    filter: ActionFilter,
) -> Result<Vec<&'m ParameterizedAction>, QueryError> {
    let c = m
        .context(context_id)
        .ok_or_else(|| QueryError::UnknownContext(context_id.to_string()))?;
    let mut out: Vec<&ParameterizedAction> = c
        .actions
        .iter()
        .filter(|a| match filter {
            ActionFilter::Taken => a.has_taken(),
            ActionFilter::Potential => !a.has_taken(),
            ActionFilter::All => true,
        })
        .collect();
    out.sort_by(|a, b| a.action_id.cmp(&b.action_id));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkflowHit<'m> {
    pub score: usize,
    pub workflow: &'m Workflow,
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Workflows ranked by how often the keywords occur as words in their step
/// names and descriptions. An empty query returns every workflow in ID order.
pub fn find_workflows<'m, S: AsRef<str>>(
    m: &'m EnvironmentMap,
    keywords: &[S],
) -> Vec<WorkflowHit<'m>> {
    let terms: Vec<String> = keywords.iter().flat_map(|k| words(k.as_ref())).collect();
    let mut hits: Vec<WorkflowHit<'m>> = m
        .workflows
        .iter()
        .map(|w| {
            let score = w
                .steps
                .iter()
                .flat_map(|s| words(&s.name).chain(words(&s.description)))
                .filter(|word| terms.contains(word))
                .count();
            WorkflowHit { score, workflow: w }
        })
        .filter(|h| terms.is_empty() || h.score > 0)
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then_with(|| a.workflow.workflow_id.cmp(&b.workflow.workflow_id))
    });
    hits
}

#[derive(Debug, Clone)]
pub struct TermHit<'m> {
    pub definition: &'m Definition,
    pub contexts: Vec<&'m Context>,
    pub actions: Vec<&'m ParameterizedAction>,
}

/// Definitions whose term equals `term`, ignoring case.
pub fn lookup_term<'m>(m: &'m EnvironmentMap, term: &str) -> Vec<TermHit<'m>> {
    let wanted = term.trim().to_lowercase();
    m.tacit_knowledge
        .definitions
        .iter()
        .filter(|d| d.term.trim().to_lowercase() == wanted)
        .map(|d| TermHit {
            definition: d,
            contexts: d
                .related_context_ids
                .iter()
                .filter_map(|id| m.context(id))
                .collect(),
            actions: d
                .related_action_ids
                .iter()
                .filter_map(|id| m.action(id).map(|(_, a)| a))
                .collect(),
        })
        .collect()
}
