use std::collections::BTreeMap;

use super::knowledge::mine;
use super::phases::generalize_class;
use super::PipelineError;
use crate::annotator::{Annotator, HeuristicAnnotator};
use crate::ids;
use crate::map::{
    default_map_description, validate_map, ActionInstance, Context, EnvironmentMap,
    KnowledgeOrigin, MapViolation, Metadata, ParameterizedAction, TacitKnowledge, Workflow,
};

/// Assembles phase outputs into a canonical, validated map.
pub fn assemble_map(
    env: &str,
    base_url: &str,
    workflows: Vec<Workflow>,
    contexts: Vec<Context>,
    knowledge: TacitKnowledge,
    metadata: Metadata,
    ann: &dyn Annotator,
) -> Result<EnvironmentMap, PipelineError> {
    let mut m = EnvironmentMap::empty(env, base_url, metadata);
    m.workflows = workflows;
    m.contexts = contexts;
    m.tacit_knowledge = knowledge;
    consolidate(m, [], ann)
}

/// Merges two maps of one environment using the heuristic annotator for
/// any template that has to be re-induced.
pub fn merge_maps(a: EnvironmentMap, b: EnvironmentMap) -> Result<EnvironmentMap, PipelineError> {
    merge_maps_with(a, b, &HeuristicAnnotator)
}

pub fn merge_maps_with(
    a: EnvironmentMap,
    b: EnvironmentMap,
    ann: &dyn Annotator,
) -> Result<EnvironmentMap, PipelineError> {
    consolidate(a, [b], ann)
}

fn mismatch(a: &EnvironmentMap, b: &EnvironmentMap) -> PipelineError {
    PipelineError::EnvironmentMismatch {
        left: format!("{} ({})", a.id, a.base_url),
        right: format!("{} ({})", b.id, b.base_url),
    }
}

/// Canonical union of maps. Contexts merge by pattern, actions by ID,
/// instances, workflows, and knowledge entries by ID (the smaller record
/// wins on conflict). Templates are re-induced when no input already covers
/// the merged instance set, and mined procedures are recomputed from the
/// merged workflows. Statistics, counts, and ordering are rebuilt.
pub fn consolidate(
    base: EnvironmentMap,
    others: impl IntoIterator<Item = EnvironmentMap>,
    ann: &dyn Annotator,
) -> Result<EnvironmentMap, PipelineError> {
    let mut maps = vec![base];
    for m in others {
        if m.base_url != maps[0].base_url || m.id != maps[0].id {
            return Err(mismatch(&maps[0], &m));
        }
        maps.push(m);
    }
    let id = maps[0].id.clone();
    let base_url = maps[0].base_url.clone();
    let metadata = maps[1..]
        .iter()
        .fold(maps[0].metadata.clone(), |acc, m| acc.combine(&m.metadata));
    let name = maps
        .iter()
        .map(|m| m.name.clone())
        .min()
        .unwrap_or_default();

    let mut by_pattern: BTreeMap<String, Vec<Context>> = BTreeMap::new();
    let mut workflows: BTreeMap<String, Workflow> = BTreeMap::new();
    let mut definitions = BTreeMap::new();
    let mut procedures = BTreeMap::new();
    for m in maps {
        for c in m.contexts {
            by_pattern.entry(c.pattern.clone()).or_default().push(c);
        }
        for w in m.workflows {
            keep_min(&mut workflows, w.workflow_id.clone(), w);
        }
        for d in m.tacit_knowledge.definitions {
            keep_min(&mut definitions, d.id.clone(), d);
        }
        for p in m.tacit_knowledge.procedures {
            if p.origin != KnowledgeOrigin::Mined {
                keep_min(&mut procedures, p.id.clone(), p);
            }
        }
    }

    let mut contexts = Vec::with_capacity(by_pattern.len());
    for (pattern, group) in by_pattern {
        contexts.push(merge_contexts(pattern, group, ann)?);
    }
    contexts.sort_by(|a, b| a.context_id.cmp(&b.context_id));

    let mut workflows: Vec<Workflow> = workflows.into_values().collect();
    for w in &mut workflows {
        w.mesh_path = Workflow::mesh_path_for(&w.workflow_id);
    }

    if metadata.annotator_kinds().contains(&"heuristic") {
        for p in mine(&workflows, &contexts).procedures {
            procedures.entry(p.id.clone()).or_insert(p);
        }
    }

    let mut m = EnvironmentMap {
        id,
        name,
        description: String::new(),
        base_url,
        contexts,
        workflows,
        tacit_knowledge: TacitKnowledge {
            definitions: definitions.into_values().collect(),
            procedures: procedures.into_values().collect(),
        },
        statistics: Default::default(),
        metadata,
    };
    m.statistics = m.compute_statistics();
    m.description = default_map_description(&m);
    let violations = validate_map(&m);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidInput(violations));
    }
    Ok(m)
}

fn keep_min<T: Ord>(into: &mut BTreeMap<String, T>, key: String, value: T) {
    match into.get_mut(&key) {
        Some(cur) if value < *cur => *cur = value,
        Some(_) => {}
        None => {
            into.insert(key, value);
        }
    }
}

fn merge_contexts(
    pattern: String,
    group: Vec<Context>,
    ann: &dyn Annotator,
) -> Result<Context, PipelineError> {
    let context_id = group
        .iter()
        .map(|c| c.context_id.clone())
        .min()
        .unwrap_or_default();
    let name = group
        .iter()
        .map(|c| c.name.clone())
        .min()
        .unwrap_or_default();
    let description = group
        .iter()
        .map(|c| c.description.clone())
        .min()
        .unwrap_or_default();

    let mut by_action: BTreeMap<String, Vec<ParameterizedAction>> = BTreeMap::new();
    for c in group {
        for a in c.actions {
            by_action.entry(a.action_id.clone()).or_default().push(a);
        }
    }
    let mut actions = Vec::with_capacity(by_action.len());
    for (action_id, versions) in by_action {
        let mut instances: BTreeMap<String, ActionInstance> = BTreeMap::new();
        for v in &versions {
            for i in &v.instances {
                keep_min(&mut instances, i.instance_id.clone(), i.clone());
            }
        }
        let instances: Vec<ActionInstance> = instances.into_values().collect();
        let covering = versions
            .into_iter()
            .filter(|v| {
                let mut own = v.instances.clone();
                own.sort();
                own == instances
            })
            .min();
        let action = match covering {
            Some(mut v) => {
                v.instances = instances;
                v
            }
            None => {
                let (verb, role) =
                    ids::decode_action_id(&action_id, &context_id).ok_or_else(|| {
                        PipelineError::InvalidInput(vec![MapViolation::MalformedId {
                            family: "action",
                            id: action_id.clone(),
                        }])
                    })?;
                generalize_class(ann, action_id, verb, &role, instances)
            }
        };
        actions.push(action);
    }

    let mut c = Context {
        mesh_path: Context::mesh_path_for(&context_id),
        context_id,
        name,
        description,
        pattern,
        actions,
        action_count: 0,
        contributing_recordings: Vec::new(),
    };
    c.action_count = c.instance_count();
    c.contributing_recordings = c.recordings();
    Ok(c)
}
