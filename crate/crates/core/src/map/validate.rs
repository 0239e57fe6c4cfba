use std::collections::HashSet;
use std::fmt;

use super::io::is_safe_mesh_path;
use super::{compute_statistics, EnvironmentMap, MAP_FILE};
use crate::ids::IdFamily;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MapViolation {
    MalformedId {
        family: &'static str,
        id: String,
    },
    DuplicateId(String),
    DuplicatePattern(String),
    CountMismatch {
        context_id: String,
        stated: usize,
        actual: usize,
    },
    RecordingsMismatch(String),
    StatisticsMismatch {
        field: &'static str,
        stated: usize,
        actual: usize,
    },
    UnresolvedReference {
        from: String,
        to: String,
    },
    ParameterizationMismatch(String),
    TemplateMismatch {
        action_id: String,
        instance_id: String,
    },
    IncompleteProvenance(String),
    EmptyWorkflow(String),
    StepNumbering(String),
    EmptyStepUrl {
        workflow_id: String,
        step_number: u32,
    },
    UnsafeMeshPath {
        owner: String,
        path: String,
    },
}

impl fmt::Display for MapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MapViolation::*;
        match self {
            MalformedId { family, id } => write!(f, "{id:?} is not a valid {family} id"),
            DuplicateId(id) => write!(f, "duplicate id {id}"),
            DuplicatePattern(p) => write!(f, "duplicate pattern {p:?}"),
            CountMismatch {
                context_id,
                stated,
                actual,
            } => write!(
                f,
                "{context_id}: action_count {stated} but {actual} instances"
            ),
            RecordingsMismatch(id) => {
                write!(
                    f,
                    "{id}: contributing_recordings disagree with instance provenance"
                )
            }
            StatisticsMismatch {
                field,
                stated,
                actual,
            } => {
                write!(f, "statistics.{field} is {stated}, expected {actual}")
            }
            UnresolvedReference { from, to } => write!(f, "{from} references unknown {to}"),
            ParameterizationMismatch(id) => {
                write!(f, "{id}: is_parameterized disagrees with its template")
            }
            TemplateMismatch {
                action_id,
                instance_id,
            } => write!(
                f,
                "{instance_id} does not instantiate the template of {action_id}"
            ),
            IncompleteProvenance(id) => write!(f, "{id}: provenance lacks a step or snapshot"),
            EmptyWorkflow(id) => write!(f, "{id} has no steps"),
            StepNumbering(id) => write!(f, "{id}: step numbers are not 1..n"),
            EmptyStepUrl {
                workflow_id,
                step_number,
            } => {
                write!(f, "{workflow_id} step {step_number} has an empty url")
            }
            UnsafeMeshPath { owner, path } => write!(f, "{owner}: unsafe mesh path {path:?}"),
        }
    }
}

fn has_placeholder(template: &str) -> bool {
    template.split('{').skip(1).any(|rest| {
        rest.split_once('}').is_some_and(|(name, _)| {
            !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        })
    })
}

/// Reports every invariant breach of a map. Empty means valid.
pub fn validate_map(m: &EnvironmentMap) -> Vec<MapViolation> {
    let mut out = Vec::new();
    let mut defined: HashSet<&str> = HashSet::new();

    let mut patterns = HashSet::new();
    let mut mesh_paths: HashSet<&str> = HashSet::from([MAP_FILE]);
    for c in &m.contexts {
        check_id(IdFamily::Context, "context", &c.context_id, &mut out);
        if !defined.insert(&c.context_id) {
            out.push(MapViolation::DuplicateId(c.context_id.clone()));
        }
        if !patterns.insert(c.pattern.as_str()) {
            out.push(MapViolation::DuplicatePattern(c.pattern.clone()));
        }
        if !is_safe_mesh_path(&c.mesh_path) || !mesh_paths.insert(&c.mesh_path) {
            out.push(MapViolation::UnsafeMeshPath {
                owner: c.context_id.clone(),
                path: c.mesh_path.clone(),
            });
        }
        let actual = c.instance_count();
        if actual != c.action_count {
            out.push(MapViolation::CountMismatch {
                context_id: c.context_id.clone(),
                stated: c.action_count,
                actual,
            });
        }
        let mut stated = c.contributing_recordings.clone();
        stated.sort();
        stated.dedup();
        if stated != c.recordings() || stated.len() != c.contributing_recordings.len() {
            out.push(MapViolation::RecordingsMismatch(c.context_id.clone()));
        }
        for a in &c.actions {
            check_id(IdFamily::Action, "action", &a.action_id, &mut out);
            if !defined.insert(&a.action_id) {
                out.push(MapViolation::DuplicateId(a.action_id.clone()));
            }
            let placeholder_ok = match a.placeholder() {
                Some(p) => a.template.matches(&p).count() == 1,
                None => !has_placeholder(&a.template),
            };
            if a.parameterized != a.parameter_name.is_some() || !placeholder_ok {
                out.push(MapViolation::ParameterizationMismatch(a.action_id.clone()));
            }
            for inst in &a.instances {
                check_id(IdFamily::Instance, "instance", &inst.instance_id, &mut out);
                if !defined.insert(&inst.instance_id) {
                    out.push(MapViolation::DuplicateId(inst.instance_id.clone()));
                }
                let instantiates = if a.parameterized {
                    a.binding_for(&inst.action_description)
                        .is_some_and(|v| a.possible_values.iter().any(|pv| pv == v))
                } else {
                    inst.action_description == a.template
                };
                if !instantiates {
                    out.push(MapViolation::TemplateMismatch {
                        action_id: a.action_id.clone(),
                        instance_id: inst.instance_id.clone(),
                    });
                }
                let p = &inst.provenance;
                let complete = if inst.is_taken {
                    p.step_number.is_some()
                } else {
                    p.snapshot_id.is_some()
                };
                if !complete || p.task_id.is_empty() {
                    out.push(MapViolation::IncompleteProvenance(inst.instance_id.clone()));
                }
            }
        }
    }

    for w in &m.workflows {
        check_id(IdFamily::Workflow, "workflow", &w.workflow_id, &mut out);
        if !defined.insert(&w.workflow_id) {
            out.push(MapViolation::DuplicateId(w.workflow_id.clone()));
        }
        if !is_safe_mesh_path(&w.mesh_path) || !mesh_paths.insert(&w.mesh_path) {
            out.push(MapViolation::UnsafeMeshPath {
                owner: w.workflow_id.clone(),
                path: w.mesh_path.clone(),
            });
        }
        if w.steps.is_empty() {
            out.push(MapViolation::EmptyWorkflow(w.workflow_id.clone()));
        }
        if w.steps
            .iter()
            .enumerate()
            .any(|(i, s)| s.step_number as usize != i + 1)
        {
            out.push(MapViolation::StepNumbering(w.workflow_id.clone()));
        }
        for s in &w.steps {
            if s.url.trim().is_empty() {
                out.push(MapViolation::EmptyStepUrl {
                    workflow_id: w.workflow_id.clone(),
                    step_number: s.step_number,
                });
            }
        }
    }

    let k = &m.tacit_knowledge;
    for d in &k.definitions {
        check_id(IdFamily::Definition, "definition", &d.id, &mut out);
        if !defined.insert(&d.id) {
            out.push(MapViolation::DuplicateId(d.id.clone()));
        }
    }
    for p in &k.procedures {
        check_id(IdFamily::Procedure, "procedure", &p.id, &mut out);
        if !defined.insert(&p.id) {
            out.push(MapViolation::DuplicateId(p.id.clone()));
        }
    }

    // Referential closure.
    let unresolved = |from: &str, to: &str| MapViolation::UnresolvedReference {
        from: from.to_string(),
        to: to.to_string(),
    };
    for w in &m.workflows {
        for s in &w.steps {
            if let Some(ctx) = &s.context_id {
                if m.context(ctx).is_none() {
                    out.push(unresolved(&w.workflow_id, ctx));
                }
            }
        }
    }
    for d in &k.definitions {
        for ctx in &d.related_context_ids {
            if m.context(ctx).is_none() {
                out.push(unresolved(&d.id, ctx));
            }
        }
        for a in &d.related_action_ids {
            if m.action(a).is_none() {
                out.push(unresolved(&d.id, a));
            }
        }
    }
    for p in &k.procedures {
        let Some(ctx) = m.context(&p.context_id) else {
            out.push(unresolved(&p.id, &p.context_id));
            continue;
        };
        for step in &p.action_sequence {
            if ctx.action(&step.action_id).is_none() {
                out.push(unresolved(&p.id, &step.action_id));
            }
        }
        for wf in &p.source_workflows {
            if m.workflow(wf).is_none() {
                out.push(unresolved(&p.id, wf));
            }
        }
    }

    let actual = compute_statistics(m);
    let stated = m.statistics;
    for (field, s, a) in [
        ("num_steps", stated.num_steps, actual.num_steps),
        (
            "pages_identified",
            stated.pages_identified,
            actual.pages_identified,
        ),
        (
            "actions_extracted",
            stated.actions_extracted,
            actual.actions_extracted,
        ),
        (
            "recordings_processed",
            stated.recordings_processed,
            actual.recordings_processed,
        ),
    ] {
        if s != a {
            out.push(MapViolation::StatisticsMismatch {
                field,
                stated: s,
                actual: a,
            });
        }
    }
    out
}

fn check_id(family: IdFamily, name: &'static str, id: &str, out: &mut Vec<MapViolation>) {
    if !family.matches(id) {
        out.push(MapViolation::MalformedId {
            family: name,
            id: id.to_string(),
        });
    }
}
