use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{
    AnnotationRequest, AnnotationResponse, Annotator, AnnotatorError, ContextDescription,
    ContextRequest, KnowledgeProposal, KnowledgeRequest, PotentialActions, PotentialProposal,
    PotentialRequest, ProposedProcedure, ProposedStep, StepSummary, StepWindow, TemplateInduction,
    TemplateRequest,
};
use crate::ids;
use crate::pipeline::display_path;
use crate::trace::ActionType;

/// Rule-based provider. A pure function of the request.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAnnotator;

impl Annotator for HeuristicAnnotator {
    fn kind(&self) -> &'static str {
        "heuristic"
    }

    fn annotate(&self, req: &AnnotationRequest) -> Result<AnnotationResponse, AnnotatorError> {
        Ok(match req {
            AnnotationRequest::SummarizeStep(w) => AnnotationResponse::SummarizeStep(summarize(w)),
            AnnotationRequest::ProposePotentialActions(p) => {
                AnnotationResponse::ProposePotentialActions(propose_potential(p))
            }
            AnnotationRequest::InduceTemplate(t) => {
                AnnotationResponse::InduceTemplate(induce_template(t))
            }
            AnnotationRequest::DescribeContext(c) => {
                AnnotationResponse::DescribeContext(describe_context(c))
            }
            AnnotationRequest::ExtractKnowledge(k) => {
                AnnotationResponse::ExtractKnowledge(mine_procedures(k))
            }
        })
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn summarize(w: &StepWindow) -> StepSummary {
    let e = &w.event;
    let target = e.target_label().map(collapse_ws);
    let value = e
        .value
        .as_deref()
        .map(collapse_ws)
        .filter(|v| !v.is_empty());
    let path = display_path(&e.url);
    let name = match e.action_type {
        ActionType::Click => format!("Click {}", target.as_deref().unwrap_or("element")),
        ActionType::Type => match (&value, &target) {
            (Some(v), Some(t)) => format!("Type {v} into {t}"),
            (Some(v), None) => format!("Type {v}"),
            (None, Some(t)) => format!("Type into {t}"),
            (None, None) => "Type text".to_string(),
        },
        ActionType::Select => match (&value, &target) {
            (Some(v), Some(t)) => format!("Select {v} in {t}"),
            (Some(v), None) => format!("Select {v}"),
            (None, Some(t)) => format!("Select {t}"),
            (None, None) => "Select option".to_string(),
        },
        ActionType::Navigate => format!("Navigate to {path}"),
        ActionType::Scroll => format!("Scroll {}", target.as_deref().unwrap_or("page")),
        ActionType::Key => match (&value, &target) {
            (Some(v), Some(t)) => format!("Press {v} in {t}"),
            (Some(v), None) => format!("Press {v}"),
            (None, Some(t)) => format!("Press key in {t}"),
            (None, None) => "Press key".to_string(),
        },
        ActionType::Utterance => "Say".to_string(),
    };
    let name = collapse_ws(&name);

    let outcome = match (&w.next_url, e.action_type) {
        (_, ActionType::Navigate) => format!("navigated to {path}"),
        (Some(next), _) if next != &e.url => format!("navigated to {}", display_path(next)),
        _ => format!("state updated on {path}"),
    };

    let mut description = format!("{name} on {path}");
    let narration: Vec<String> = w
        .narration
        .iter()
        .map(|n| collapse_ws(n))
        .filter(|n| !n.is_empty())
        .collect();
    if !narration.is_empty() {
        description.push_str(". Narration: ");
        description.push_str(&narration.join(" "));
    }
    StepSummary {
        name,
        description,
        outcome,
    }
}

/// Verb assigned to a proposed action on an element with `role`.
pub fn potential_verb(role: &str) -> ActionType {
    match role {
        "textbox" | "searchbox" => ActionType::Type,
        _ => ActionType::Click,
    }
}

fn propose_potential(p: &PotentialRequest) -> PotentialActions {
    let path = display_path(&p.snapshot.url);
    let actions = p
        .snapshot
        .elements
        .iter()
        .filter(|el| el.interactable)
        .filter(|el| !p.taken.iter().any(|t| t.covers(&el.element_id, &el.text)))
        .map(|el| {
            let label = match collapse_ws(&el.text) {
                t if t.is_empty() => el.element_id.clone(),
                t => t,
            };
            let (name, expected_outcome) = match potential_verb(&el.role) {
                ActionType::Type => (
                    format!("Type into {label}"),
                    format!("text entered on {path}"),
                ),
                _ if el.role == "link" => (
                    format!("Click {label}"),
                    format!("navigation away from {path}"),
                ),
                _ => (format!("Click {label}"), format!("state updated on {path}")),
            };
            PotentialProposal {
                element_id: el.element_id.clone(),
                description: format!("{name} on {path} (not exercised in the recording)"),
                name,
                expected_outcome,
            }
        })
        .collect();
    PotentialActions { actions }
}

/// Parameter name derived from verb and element role.
fn parameter_name(verb: ActionType, role: Option<&str>) -> String {
    if verb == ActionType::Navigate {
        return "url".to_string();
    }
    format!("{}_text", ids::role_key(role))
}

/// Longest common token prefix and suffix; the differing middle becomes
/// the parameter. Every middle keeps at least one token.
pub fn induce_template(req: &TemplateRequest) -> TemplateInduction {
    let names: Vec<String> = req.instances.iter().map(|n| collapse_ws(n)).collect();
    let distinct: BTreeSet<&str> = names.iter().map(String::as_str).collect();
    if distinct.len() <= 1 {
        return TemplateInduction {
            template: distinct.first().copied().unwrap_or_default().to_string(),
            parameter_name: None,
            bindings: Vec::new(),
        };
    }
    let tokens: Vec<Vec<&str>> = names
        .iter()
        .map(|n| n.split(' ').filter(|t| !t.is_empty()).collect())
        .collect();
    let min_len = tokens.iter().map(Vec::len).min().unwrap_or(0);

    let mut prefix = 0;
    while prefix + 1 < min_len && tokens.iter().all(|t| t[prefix] == tokens[0][prefix]) {
        prefix += 1;
    }
    let mut suffix = 0;
    while prefix + suffix + 1 < min_len
        && tokens
            .iter()
            .all(|t| t[t.len() - 1 - suffix] == tokens[0][tokens[0].len() - 1 - suffix])
    {
        suffix += 1;
    }

    let param = parameter_name(req.verb, req.element_role.as_deref());
    let head = tokens[0][..prefix].join(" ");
    let tail = tokens[0][tokens[0].len() - suffix..].join(" ");
    let mut template = head;
    if !template.is_empty() {
        template.push(' ');
    }
    template.push_str(&format!("{{{param}}}"));
    if !tail.is_empty() {
        template.push(' ');
        template.push_str(&tail);
    }
    let bindings = tokens
        .iter()
        .map(|t| t[prefix..t.len() - suffix].join(" "))
        .collect();
    TemplateInduction {
        template,
        parameter_name: Some(param),
        bindings,
    }
}

fn describe_context(c: &ContextRequest) -> ContextDescription {
    let last_literal = c
        .pattern
        .split('/')
        .rfind(|s| !s.is_empty() && !ids::PLACEHOLDERS.contains(s));
    let word = last_literal
        .map(ids::sanitize)
        .unwrap_or_else(|| "main".into());
    ContextDescription {
        name: format!("{}_{word}", ids::sanitize(&c.environment)),
        description: format!("The {} page on {}.", word.replace('_', " "), c.environment),
    }
}

type Candidate = Vec<(String, String)>;

/// Per context, the most frequent repeated run of steps (length at least 2,
/// seen in at least 2 workflows); ties go to the longer, then smaller run.
fn mine_procedures(req: &KnowledgeRequest) -> KnowledgeProposal {
    let mut support: BTreeMap<(String, Candidate), BTreeSet<String>> = BTreeMap::new();
    for w in &req.workflows {
        let mut runs: Vec<(String, Vec<(String, String)>)> = Vec::new();
        for s in &w.steps {
            let (Some(ctx), Some(action)) = (&s.context_id, &s.action_id) else {
                runs.push((String::new(), Vec::new()));
                continue;
            };
            match runs.last_mut() {
                Some((c, run)) if c == ctx => run.push((action.clone(), s.name.clone())),
                _ => runs.push((ctx.clone(), vec![(action.clone(), s.name.clone())])),
            }
        }
        for (ctx, run) in runs.iter().filter(|(c, r)| !c.is_empty() && r.len() >= 2) {
            for start in 0..run.len() {
                for end in start + 2..=run.len() {
                    support
                        .entry((ctx.clone(), run[start..end].to_vec()))
                        .or_default()
                        .insert(w.workflow_id.clone());
                }
            }
        }
    }

    let mut best: HashMap<&str, (&Candidate, &BTreeSet<String>)> = HashMap::new();
    for ((ctx, cand), workflows) in &support {
        if workflows.len() < 2 {
            continue;
        }
        let better = match best.get(ctx.as_str()) {
            None => true,
            Some((c, w)) => {
                (workflows.len(), cand.len()) > (w.len(), c.len())
                    || ((workflows.len(), cand.len()) == (w.len(), c.len()) && cand < c)
            }
        };
        if better {
            best.insert(ctx, (cand, workflows));
        }
    }

    let patterns: HashMap<&str, &str> = req
        .contexts
        .iter()
        .map(|c| (c.context_id.as_str(), c.pattern.as_str()))
        .collect();
    let mut procedures: Vec<ProposedProcedure> = best
        .into_iter()
        .map(|(ctx, (cand, workflows))| {
            let steps: Vec<&str> = cand.iter().map(|(_, n)| n.as_str()).collect();
            ProposedProcedure {
                goal: format!(
                    "Repeated sequence in {}: {}",
                    patterns.get(ctx).copied().unwrap_or(ctx),
                    steps.join(" -> ")
                ),
                context_id: ctx.to_string(),
                action_sequence: cand
                    .iter()
                    .map(|(a, n)| ProposedStep {
                        action_id: a.clone(),
                        action: n.clone(),
                    })
                    .collect(),
                source_workflows: workflows.iter().cloned().collect(),
            }
        })
        .collect();
    procedures.sort_by(|a, b| a.context_id.cmp(&b.context_id));
    KnowledgeProposal {
        definitions: Vec::new(),
        procedures,
    }
}
