//! Graph export of a map: an environment root, context nodes, and action
//! nodes colored by whether they were taken or only proposed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ids;
use crate::map::{validate_map, Context, EnvironmentMap, MapViolation, ParameterizedAction};

#[derive(Debug, Error)]
pub enum VizError {
    #[error("map is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMap(Vec<MapViolation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFamily {
    Environment,
    Context,
    TakenAction,
    PotentialAction,
}

impl NodeFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeFamily::Environment => "environment",
            NodeFamily::Context => "context",
            NodeFamily::TakenAction => "taken_action",
            NodeFamily::PotentialAction => "potential_action",
        }
    }

    fn color(self) -> &'static str {
        match self {
            NodeFamily::Environment => "red",
            NodeFamily::Context => "blue",
            NodeFamily::TakenAction => "orange",
            NodeFamily::PotentialAction => "green",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Containment,
    Sequential,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub node_id: String,
    pub family: NodeFamily,
    pub label: String,
    pub has_knowledge: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphDoc {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    GraphJson,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "graph-json" => Ok(ExportFormat::GraphJson),
            other => Err(format!("unknown format {other:?} (dot, graph-json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOptions {
    pub max_contexts: Option<usize>,
    pub max_actions_per_context: Option<usize>,
}

/// Keeps the `limit` largest items by instance count, ties broken by ID,
/// and returns them in ID order.
fn top<'a, T>(
    items: impl Iterator<Item = &'a T>,
    limit: Option<usize>,
    size: impl Fn(&T) -> usize,
    id: impl Fn(&T) -> &str,
) -> Vec<&'a T>
where
    T: 'a,
{
    let mut v: Vec<&T> = items.collect();
    if let Some(n) = limit {
        v.sort_by(|a, b| size(b).cmp(&size(a)).then_with(|| id(a).cmp(id(b))));
        v.truncate(n);
    }
    v.sort_by(|a, b| id(a).cmp(id(b)));
    v
}

fn knowledge_refs(m: &EnvironmentMap) -> HashSet<&str> {
    let k = &m.tacit_knowledge;
    let mut refs = HashSet::new();
    for d in &k.definitions {
        refs.extend(d.related_context_ids.iter().map(String::as_str));
        refs.extend(d.related_action_ids.iter().map(String::as_str));
    }
    for p in &k.procedures {
        refs.insert(p.context_id.as_str());
        refs.extend(p.action_sequence.iter().map(|s| s.action_id.as_str()));
    }
    refs
}

pub fn build_graph(m: &EnvironmentMap, opts: ExportOptions) -> Result<GraphDoc, VizError> {
    let violations = validate_map(m);
    if !violations.is_empty() {
        return Err(VizError::InvalidMap(violations));
    }
    let refs = knowledge_refs(m);
    let mut doc = GraphDoc::default();
    doc.nodes.push(GraphNode {
        node_id: m.id.clone(),
        family: NodeFamily::Environment,
        label: m.name.clone(),
        has_knowledge: false,
    });

    let contexts = top(
        m.contexts.iter(),
        opts.max_contexts,
        |c: &Context| c.action_count,
        |c: &Context| &c.context_id,
    );
    let mut kept: HashSet<&str> = HashSet::new();
    let mut alternatives = Vec::new();
    for c in &contexts {
        doc.nodes.push(GraphNode {
            node_id: c.context_id.clone(),
            family: NodeFamily::Context,
            label: c.pattern.clone(),
            has_knowledge: refs.contains(c.context_id.as_str()),
        });
        doc.edges.push(GraphEdge {
            from: m.id.clone(),
            to: c.context_id.clone(),
            kind: EdgeKind::Containment,
        });
        let actions = top(
            c.actions.iter(),
            opts.max_actions_per_context,
            |a: &ParameterizedAction| a.instances.len(),
            |a: &ParameterizedAction| &a.action_id,
        );
        for a in &actions {
            kept.insert(&a.action_id);
            doc.nodes.push(GraphNode {
                node_id: a.action_id.clone(),
                family: if a.has_taken() {
                    NodeFamily::TakenAction
                } else {
                    NodeFamily::PotentialAction
                },
                label: a.template.clone(),
                has_knowledge: refs.contains(a.action_id.as_str()),
            });
            doc.edges.push(GraphEdge {
                from: c.context_id.clone(),
                to: a.action_id.clone(),
                kind: EdgeKind::Containment,
            });
        }
        // Parameterized siblings sharing a verb are alternatives.
        let parameterized: Vec<(&ParameterizedAction, _)> = actions
            .iter()
            .filter(|a| a.parameterized)
            .filter_map(|a| {
                ids::decode_action_id(&a.action_id, &c.context_id).map(|(v, _)| (*a, v))
            })
            .collect();
        for (i, (a, verb)) in parameterized.iter().enumerate() {
            for (b, other) in &parameterized[i + 1..] {
                if verb == other {
                    alternatives.push(GraphEdge {
                        from: a.action_id.clone(),
                        to: b.action_id.clone(),
                        kind: EdgeKind::Alternative,
                    });
                }
            }
        }
    }

    let taken_at: HashMap<&str, &str> = m
        .contexts
        .iter()
        .flat_map(|c| &c.actions)
        .flat_map(|a| {
            a.instances
                .iter()
                .map(move |i| (i.instance_id.as_str(), a.action_id.as_str()))
        })
        .collect();
    let mut sequential: BTreeSet<(String, String)> = BTreeSet::new();
    for w in &m.workflows {
        for pair in w.steps.windows(2) {
            let (s, t) = (&pair[0], &pair[1]);
            if s.context_id.is_none() || s.context_id != t.context_id {
                continue;
            }
            let action = |n| {
                taken_at
                    .get(ids::instance_id(&w.task_id, n, 0).as_str())
                    .copied()
            };
            if let (Some(a), Some(b)) = (action(s.step_number), action(t.step_number)) {
                if a != b && kept.contains(a) && kept.contains(b) {
                    sequential.insert((a.to_string(), b.to_string()));
                }
            }
        }
    }
    doc.edges
        .extend(sequential.into_iter().map(|(from, to)| GraphEdge {
            from,
            to,
            kind: EdgeKind::Sequential,
        }));
    doc.edges.extend(alternatives);
    Ok(doc)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub fn render_dot(doc: &GraphDoc) -> String {
    let mut out = String::from("digraph envmap {\n  graph [rankdir=\"LR\"];\n  node [shape=\"box\", style=\"filled\", fontcolor=\"white\"];\n");
    for n in &doc.nodes {
        let color = n.family.color();
        let glow = if n.has_knowledge {
            ", color=\"purple\", penwidth=\"4\""
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} [label={}, family=\"{}\", fillcolor=\"{color}\"{glow}];",
            quote(&n.node_id),
            quote(&n.label),
            n.family.as_str(),
        );
    }
    for e in &doc.edges {
        let style = match e.kind {
            EdgeKind::Containment => "color=\"gray\"",
            EdgeKind::Sequential => "color=\"blue\"",
            EdgeKind::Alternative => "color=\"purple\", style=\"dashed\", dir=\"none\"",
        };
        let kind = match e.kind {
            EdgeKind::Containment => "containment",
            EdgeKind::Sequential => "sequential",
            EdgeKind::Alternative => "alternative",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [kind=\"{kind}\", {style}];",
            quote(&e.from),
            quote(&e.to)
        );
    }
    out.push_str("}\n");
    out
}

pub fn export_graph(
    m: &EnvironmentMap,
    format: ExportFormat,
    opts: ExportOptions,
) -> Result<String, VizError> {
    let doc = build_graph(m, opts)?;
    Ok(match format {
        ExportFormat::Dot => render_dot(&doc),
        ExportFormat::GraphJson => {
            let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
            s.push('\n');
            s
        }
    })
}
