use std::collections::{BTreeMap, HashMap, HashSet};

use super::{BuildReport, Pipeline};
use crate::annotator::{
    annotate_or_fallback, AnnotationRequest, AnnotationResponse, Annotator, KnowledgeContext,
    KnowledgeProposal, KnowledgeRequest, KnowledgeStep, KnowledgeWorkflow,
};
use crate::ids;
use crate::map::{
    Context, Definition, KnowledgeOrigin, Procedure, ProcedureStep, TacitKnowledge, Workflow,
};

pub(crate) fn knowledge_request(workflows: &[Workflow], contexts: &[Context]) -> KnowledgeRequest {
    let taken: HashMap<&str, &str> = contexts
        .iter()
        .flat_map(|c| &c.actions)
        .flat_map(|a| {
            a.instances
                .iter()
                .map(move |i| (i.instance_id.as_str(), a.action_id.as_str()))
        })
        .collect();
    let mut workflows: Vec<&Workflow> = workflows.iter().collect();
    workflows.sort_by(|a, b| a.workflow_id.cmp(&b.workflow_id));
    KnowledgeRequest {
        workflows: workflows
            .into_iter()
            .map(|w| KnowledgeWorkflow {
                workflow_id: w.workflow_id.clone(),
                steps: w
                    .steps
                    .iter()
                    .map(|s| KnowledgeStep {
                        step_number: s.step_number,
                        name: s.name.clone(),
                        context_id: s.context_id.clone(),
                        action_id: taken
                            .get(ids::instance_id(&w.task_id, s.step_number, 0).as_str())
                            .map(|a| a.to_string()),
                    })
                    .collect(),
            })
            .collect(),
        contexts: contexts
            .iter()
            .map(|c| KnowledgeContext {
                context_id: c.context_id.clone(),
                name: c.name.clone(),
                pattern: c.pattern.clone(),
            })
            .collect(),
    }
}

/// Turns proposals into knowledge entries with assigned IDs, dropping
/// references that do not resolve. A procedure with any unresolved step is
/// dropped whole.
pub fn resolve_knowledge(
    proposal: KnowledgeProposal,
    workflows: &[Workflow],
    contexts: &[Context],
    origin: KnowledgeOrigin,
) -> (TacitKnowledge, BuildReport) {
    let mut report = BuildReport::default();
    let context_ids: HashSet<&str> = contexts.iter().map(|c| c.context_id.as_str()).collect();
    let action_ids: HashSet<&str> = contexts
        .iter()
        .flat_map(|c| c.actions.iter().map(|a| a.action_id.as_str()))
        .collect();
    let workflow_ids: HashSet<&str> = workflows.iter().map(|w| w.workflow_id.as_str()).collect();

    let mut definitions: BTreeMap<String, Definition> = BTreeMap::new();
    let mut proposed = proposal.definitions;
    proposed.sort_by(|a, b| (&a.term, &a.meaning).cmp(&(&b.term, &b.meaning)));
    for d in proposed {
        if d.term.trim().is_empty() {
            report.warn("definition with an empty term dropped".to_string());
            continue;
        }
        let id = ids::definition_id(&d.term);
        if definitions.contains_key(&id) {
            report.warn(format!("duplicate definition {id} dropped"));
            continue;
        }
        let mut keep = |refs: Vec<String>, known: &HashSet<&str>| {
            let mut kept: Vec<String> = Vec::new();
            for r in refs {
                if known.contains(r.as_str()) {
                    kept.push(r);
                } else {
                    report.warn(format!("{id}: unresolved reference {r} dropped"));
                }
            }
            kept.sort();
            kept.dedup();
            kept
        };
        let related_context_ids = keep(d.related_context_ids, &context_ids);
        let related_action_ids = keep(d.related_action_ids, &action_ids);
        definitions.insert(
            id.clone(),
            Definition {
                id,
                term: d.term,
                meaning: d.meaning,
                related_context_ids,
                related_action_ids,
                origin,
            },
        );
    }

    let mut procedures: Vec<Procedure> = Vec::new();
    let mut per_context: HashMap<String, usize> = HashMap::new();
    let mut proposed = proposal.procedures;
    proposed.sort_by(|a, b| {
        (&a.context_id, &a.action_sequence, &a.goal).cmp(&(
            &b.context_id,
            &b.action_sequence,
            &b.goal,
        ))
    });
    for p in proposed {
        let Some(ctx) = contexts.iter().find(|c| c.context_id == p.context_id) else {
            report.warn(format!(
                "procedure for unknown context {} dropped",
                p.context_id
            ));
            continue;
        };
        if let Some(bad) = p
            .action_sequence
            .iter()
            .find(|s| ctx.action(&s.action_id).is_none())
        {
            report.warn(format!(
                "procedure in {} references unknown action {}; dropped",
                p.context_id, bad.action_id
            ));
            continue;
        }
        if p.action_sequence.is_empty() {
            report.warn(format!("empty procedure in {} dropped", p.context_id));
            continue;
        }
        let mut source_workflows = Vec::new();
        for w in p.source_workflows {
            if workflow_ids.contains(w.as_str()) {
                source_workflows.push(w);
            } else {
                report.warn(format!(
                    "procedure in {}: unknown workflow {w} dropped",
                    p.context_id
                ));
            }
        }
        source_workflows.sort();
        source_workflows.dedup();
        let n = per_context.entry(p.context_id.clone()).or_insert(0);
        *n += 1;
        let base = ids::procedure_id(&p.context_id);
        let id = if *n == 1 { base } else { format!("{base}_{n}") };
        procedures.push(Procedure {
            id,
            goal: p.goal,
            context_id: p.context_id,
            action_sequence: p
                .action_sequence
                .into_iter()
                .map(|s| ProcedureStep {
                    action_id: s.action_id,
                    action: s.action,
                })
                .collect(),
            source_workflows,
            origin,
        });
    }
    procedures.sort_by(|a, b| a.id.cmp(&b.id));
    (
        TacitKnowledge {
            definitions: definitions.into_values().collect(),
            procedures,
        },
        report,
    )
}

/// Knowledge mined from workflows by the heuristic rules.
pub(crate) fn mine(workflows: &[Workflow], contexts: &[Context]) -> TacitKnowledge {
    let req = AnnotationRequest::ExtractKnowledge(knowledge_request(workflows, contexts));
    let resp = annotate_or_fallback(&crate::annotator::HeuristicAnnotator, &req);
    let AnnotationResponse::ExtractKnowledge(p) = resp else {
        unreachable!("validated response kind")
    };
    resolve_knowledge(p, workflows, contexts, KnowledgeOrigin::Mined).0
}

pub(crate) fn extract_with(
    ann: &dyn Annotator,
    workflows: &[Workflow],
    contexts: &[Context],
) -> (TacitKnowledge, BuildReport) {
    let req = AnnotationRequest::ExtractKnowledge(knowledge_request(workflows, contexts));
    let AnnotationResponse::ExtractKnowledge(p) = annotate_or_fallback(ann, &req) else {
        unreachable!("validated response kind")
    };
    let origin = if ann.kind() == "heuristic" {
        KnowledgeOrigin::Mined
    } else {
        KnowledgeOrigin::Annotated
    };
    resolve_knowledge(p, workflows, contexts, origin)
}

impl Pipeline {
    /// Definitions and procedures for the assembled contexts.
    pub fn extract_knowledge(
        &self,
        workflows: &[Workflow],
        contexts: &[Context],
    ) -> (TacitKnowledge, BuildReport) {
        extract_with(self.annotator.as_ref(), workflows, contexts)
    }
}
