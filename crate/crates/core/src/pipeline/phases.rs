use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{Pipeline, PipelineError};
use crate::annotator::{
    annotate_or_fallback, potential_verb, AnnotationRequest, AnnotationResponse, Annotator,
    ContextRequest, PotentialRequest, StepWindow, TakenRef, TemplateInduction, TemplateRequest,
};
use crate::ids;
use crate::map::{
    ActionInstance, Context, ParameterizedAction, Provenance, RawAction, Step, Workflow,
};
use crate::trace::{
    filter_accessibility_tree, serialize_snapshot, ActionType, DomSnapshot, FilterLimits,
    Trajectory,
};

/// Characters of serialized page content sent with annotation requests.
pub const EXCERPT_CHARS: usize = 2000;

/// A generalized action together with the URL pattern of its context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternAction {
    pub pattern: String,
    pub action: ParameterizedAction,
}

fn excerpt(snapshot: &DomSnapshot) -> String {
    let tree = filter_accessibility_tree(&serialize_snapshot(snapshot), FilterLimits::default());
    tree.chars().take(EXCERPT_CHARS).collect()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Template for instances sorted by instance ID. A single distinct name is
/// its own unparameterized template and needs no annotation.
pub(crate) fn induce(
    ann: &dyn Annotator,
    verb: ActionType,
    role: &str,
    names: Vec<String>,
) -> TemplateInduction {
    let distinct: BTreeSet<&String> = names.iter().collect();
    if distinct.len() == 1 {
        return TemplateInduction {
            template: names[0].clone(),
            parameter_name: None,
            bindings: Vec::new(),
        };
    }
    let req = AnnotationRequest::InduceTemplate(TemplateRequest {
        verb,
        element_role: Some(role.to_string()),
        instances: names,
    });
    match annotate_or_fallback(ann, &req) {
        AnnotationResponse::InduceTemplate(t) => t,
        _ => unreachable!("validated response kind"),
    }
}

/// Builds a [`ParameterizedAction`] over `instances` (any order).
pub(crate) fn generalize_class(
    ann: &dyn Annotator,
    action_id: String,
    verb: ActionType,
    role: &str,
    mut instances: Vec<ActionInstance>,
) -> ParameterizedAction {
    instances.sort();
    let names = instances
        .iter()
        .map(|i| i.action_description.clone())
        .collect();
    let t = induce(ann, verb, role, names);
    let mut values = t.bindings;
    values.sort();
    values.dedup();
    ParameterizedAction {
        template: t.template,
        action_id,
        kind: ParameterizedAction::KIND_GENERALIZED.to_string(),
        parameterized: t.parameter_name.is_some(),
        parameter_name: t.parameter_name,
        possible_values: values,
        instances,
    }
}

impl Pipeline {
    fn context_for(&self, url: &str) -> Result<(String, String), PipelineError> {
        let pattern = self.normalizer.normalize(url)?;
        let id = ids::context_id(&self.env, &pattern);
        Ok((pattern, id))
    }

    /// One step per action event; utterances narrate the following step.
    pub fn build_steps(&self, t: &Trajectory) -> Result<Workflow, PipelineError> {
        let mut steps = Vec::new();
        let mut narration = Vec::new();
        let actions: Vec<usize> = (0..t.events.len())
            .filter(|&i| !t.events[i].is_utterance())
            .collect();
        for (pos, &i) in actions.iter().enumerate() {
            let start = if pos == 0 { 0 } else { actions[pos - 1] + 1 };
            for e in &t.events[start..i] {
                narration.extend(e.utterance.clone());
            }
            let e = &t.events[i];
            let next_url = actions.get(pos + 1).map(|&n| t.events[n].url.clone());
            let snapshot_excerpt = e
                .snapshot_ref
                .as_ref()
                .and_then(|r| t.snapshots.get(r))
                .map(excerpt);
            let req = AnnotationRequest::SummarizeStep(StepWindow {
                narration: std::mem::take(&mut narration),
                event: e.clone(),
                next_url,
                snapshot_excerpt,
            });
            let AnnotationResponse::SummarizeStep(s) =
                annotate_or_fallback(self.annotator.as_ref(), &req)
            else {
                unreachable!("validated response kind")
            };
            let (_, context_id) = self.context_for(&e.url)?;
            steps.push(Step {
                step_number: pos as u32 + 1,
                name: collapse_ws(&s.name),
                description: s.description,
                outcome: s.outcome,
                url: e.url.clone(),
                context_id: Some(context_id),
            });
        }
        let workflow_id = ids::workflow_id(&self.env, &t.task_id);
        Ok(Workflow {
            mesh_path: Workflow::mesh_path_for(&workflow_id),
            workflow_id,
            task_id: t.task_id.clone(),
            steps,
        })
    }

    /// One taken action per step plus proposals for unexercised elements.
    pub fn extract_actions(
        &self,
        w: &Workflow,
        t: &Trajectory,
    ) -> Result<Vec<RawAction>, PipelineError> {
        let source = t.source_label();
        let action_events: Vec<_> = t.action_events().collect();
        let mut out = Vec::new();
        for (step, e) in w.steps.iter().zip(&action_events) {
            out.push(RawAction {
                instance_id: ids::instance_id(&t.task_id, step.step_number, 0),
                name: step.name.clone(),
                description: step.description.clone(),
                expected_outcome: step.outcome.clone(),
                taken: true,
                url: step.url.clone(),
                verb: e.action_type,
                element_role: e.element_role.clone(),
                provenance: Provenance {
                    source: source.clone(),
                    task_id: t.task_id.clone(),
                    step_number: Some(step.step_number),
                    snapshot_id: None,
                },
            });
        }

        let taken: Vec<TakenRef> = action_events
            .iter()
            .map(|e| TakenRef {
                selector: e.selector.clone(),
                text: e.element_text.clone(),
            })
            .collect();
        // Step a snapshot belongs to: the latest action step at or before it.
        let step_at: Vec<(u64, u32)> = action_events
            .iter()
            .enumerate()
            .map(|(i, e)| (e.index, i as u32 + 1))
            .collect();
        let anchor = |capture: u64| {
            step_at
                .iter()
                .take_while(|(idx, _)| *idx <= capture)
                .last()
                .map_or(0, |(_, s)| *s)
        };
        let mut snapshots: Vec<&DomSnapshot> = t.snapshots.values().collect();
        snapshots.sort_by(|a, b| {
            (a.capture_index, &a.snapshot_id).cmp(&(b.capture_index, &b.snapshot_id))
        });
        let mut counters: HashMap<u32, u32> = HashMap::new();
        for snap in snapshots {
            self.normalizer.normalize(&snap.url)?;
            let req = AnnotationRequest::ProposePotentialActions(PotentialRequest {
                snapshot: snap.clone(),
                taken: taken.clone(),
            });
            let AnnotationResponse::ProposePotentialActions(p) =
                annotate_or_fallback(self.annotator.as_ref(), &req)
            else {
                unreachable!("validated response kind")
            };
            let roles: HashMap<&str, &str> = snap
                .elements
                .iter()
                .map(|e| (e.element_id.as_str(), e.role.as_str()))
                .collect();
            let order: HashMap<&str, usize> = snap
                .elements
                .iter()
                .enumerate()
                .map(|(i, e)| (e.element_id.as_str(), i))
                .collect();
            let mut proposals = p.actions;
            proposals.sort_by_key(|a| order.get(a.element_id.as_str()).copied());
            let step = anchor(snap.capture_index);
            for a in proposals {
                let counter = counters.entry(step).or_insert(0);
                *counter += 1;
                let role = roles
                    .get(a.element_id.as_str())
                    .copied()
                    .unwrap_or_default();
                out.push(RawAction {
                    instance_id: ids::instance_id(&t.task_id, step, *counter),
                    name: collapse_ws(&a.name),
                    description: a.description,
                    expected_outcome: a.expected_outcome,
                    taken: false,
                    url: snap.url.clone(),
                    verb: potential_verb(role),
                    element_role: Some(role.to_string()),
                    provenance: Provenance {
                        source: source.clone(),
                        task_id: t.task_id.clone(),
                        step_number: None,
                        snapshot_id: Some(snap.snapshot_id.clone()),
                    },
                });
            }
        }
        Ok(out)
    }

    /// Partitions raw actions by (pattern, verb, role) and induces one
    /// template per class.
    pub fn generalize_actions(
        &self,
        raw: Vec<RawAction>,
    ) -> Result<Vec<PatternAction>, PipelineError> {
        let mut classes: BTreeMap<(String, ActionType, String), Vec<ActionInstance>> =
            BTreeMap::new();
        for r in raw {
            let pattern = self.normalizer.normalize(&r.url)?;
            let role = ids::role_key(r.element_role.as_deref());
            classes
                .entry((pattern, r.verb, role))
                .or_default()
                .push(ActionInstance {
                    instance_id: r.instance_id,
                    is_taken: r.taken,
                    action_description: collapse_ws(&r.name),
                    provenance: r.provenance,
                });
        }
        Ok(classes
            .into_iter()
            .map(|((pattern, verb, role), instances)| {
                let ctx = ids::context_id(&self.env, &pattern);
                let action_id = ids::action_id(&ctx, verb, &role);
                let action =
                    generalize_class(self.annotator.as_ref(), action_id, verb, &role, instances);
                PatternAction { pattern, action }
            })
            .collect())
    }

    /// One context per pattern. Page excerpts come from the earliest
    /// snapshot (by task, capture index, ID) whose URL has that pattern.
    pub fn build_contexts(
        &self,
        actions: Vec<PatternAction>,
        trajectories: &[Trajectory],
    ) -> Result<Vec<Context>, PipelineError> {
        let mut by_pattern: BTreeMap<String, Vec<ParameterizedAction>> = BTreeMap::new();
        for pa in actions {
            by_pattern.entry(pa.pattern).or_default().push(pa.action);
        }
        let mut pages: BTreeMap<String, (&str, u64, &str, &DomSnapshot)> = BTreeMap::new();
        for t in trajectories {
            for s in t.snapshots.values() {
                let Ok(pattern) = self.normalizer.normalize(&s.url) else {
                    continue;
                };
                let key = (
                    t.task_id.as_str(),
                    s.capture_index,
                    s.snapshot_id.as_str(),
                    s,
                );
                pages
                    .entry(pattern)
                    .and_modify(|cur| {
                        if (key.0, key.1, key.2) < (cur.0, cur.1, cur.2) {
                            *cur = key;
                        }
                    })
                    .or_insert(key);
            }
        }

        let mut contexts = Vec::with_capacity(by_pattern.len());
        for (pattern, mut actions) in by_pattern {
            actions.sort_by(|a, b| a.action_id.cmp(&b.action_id));
            let context_id = ids::context_id(&self.env, &pattern);
            let req = AnnotationRequest::DescribeContext(ContextRequest {
                environment: self.env.clone(),
                pattern: pattern.clone(),
                page_excerpt: pages.get(&pattern).map(|p| excerpt(p.3)),
            });
            let AnnotationResponse::DescribeContext(d) =
                annotate_or_fallback(self.annotator.as_ref(), &req)
            else {
                unreachable!("validated response kind")
            };
            let mut c = Context {
                mesh_path: Context::mesh_path_for(&context_id),
                context_id,
                name: d.name,
                description: d.description,
                pattern,
                actions,
                action_count: 0,
                contributing_recordings: Vec::new(),
            };
            c.action_count = c.instance_count();
            c.contributing_recordings = c.recordings();
            contexts.push(c);
        }
        Ok(contexts)
    }
}
