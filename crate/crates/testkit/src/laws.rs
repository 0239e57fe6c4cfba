//! Checkers for the algebraic and bookkeeping laws of map construction.
//! Each returns a list of human-readable failures; empty means the law holds.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use envmap::map::render_map;
use envmap::pipeline::{merge_maps, PipelineError};
use envmap::{EnvironmentMap, Pipeline, Trajectory};

pub type Files = BTreeMap<PathBuf, String>;

pub fn files(m: &EnvironmentMap) -> Files {
    render_map(m)
}

fn merged(a: &EnvironmentMap, b: &EnvironmentMap) -> Result<EnvironmentMap, PipelineError> {
    merge_maps(a.clone(), b.clone())
}

fn compare(law: &str, left: &Files, right: &Files, out: &mut Vec<String>) {
    if left == right {
        return;
    }
    let differing = left
        .keys()
        .chain(right.keys())
        .find(|k| left.get(*k) != right.get(*k))
        .map(|k| k.display().to_string())
        .unwrap_or_default();
    out.push(format!("{law}: outputs differ (first at {differing})"));
}

/// Identity, idempotence, commutativity, and associativity as byte equality
/// of the rendered map files.
pub fn merge_law_failures(
    empty: &EnvironmentMap,
    a: &EnvironmentMap,
    b: &EnvironmentMap,
    c: &EnvironmentMap,
) -> Vec<String> {
    let mut out = Vec::new();
    let run = |out: &mut Vec<String>| -> Result<(), PipelineError> {
        let fa = files(a);
        compare("identity (left)", &files(&merged(empty, a)?), &fa, out);
        compare("identity (right)", &files(&merged(a, empty)?), &fa, out);
        compare("idempotence", &files(&merged(a, a)?), &fa, out);
        let ab = merged(a, b)?;
        compare("commutativity", &files(&ab), &files(&merged(b, a)?), out);
        let left = merged(&ab, c)?;
        let right = merged(a, &merged(b, c)?)?;
        compare("associativity", &files(&left), &files(&right), out);
        Ok(())
    };
    if let Err(e) = run(&mut out) {
        out.push(format!("merge failed: {e}"));
    }
    out
}

/// Per-trajectory maps merged left to right against the single-shot build.
pub fn split_rebuild_failures(p: &Pipeline, ts: &[Trajectory]) -> Vec<String> {
    let mut out = Vec::new();
    let whole = match p.build(ts) {
        Ok((m, _)) => m,
        Err(e) => return vec![format!("single-shot build failed: {e}")],
    };
    let mut acc = p.empty_map();
    for t in ts {
        let part = match p.build(std::slice::from_ref(t)) {
            Ok((m, _)) => m,
            Err(e) => return vec![format!("build of {} failed: {e}", t.task_id)],
        };
        acc = match merge_maps(acc, part) {
            Ok(m) => m,
            Err(e) => return vec![format!("merge of {} failed: {e}", t.task_id)],
        };
    }
    compare("split/rebuild", &files(&acc), &files(&whole), &mut out);
    out
}

/// Instances partition the raw actions, instance IDs are unique, and every
/// provenance record names a real step or snapshot of its trajectory.
pub fn partition_failures(p: &Pipeline, ts: &[Trajectory]) -> Vec<String> {
    let mut out = Vec::new();
    let mut raw_count = 0;
    let mut parts = Vec::new();
    for t in ts {
        match p.trajectory_part(t) {
            Ok(part) => {
                raw_count += part.raw_actions.len();
                parts.push(part);
            }
            Err(e) => return vec![format!("{}: {e}", t.task_id)],
        }
    }
    let m = match p.finish(parts, ts) {
        Ok((m, _)) => m,
        Err(e) => return vec![format!("assembly failed: {e}")],
    };
    let index = crate::provenance_index(ts);
    let mut seen = HashSet::new();
    let mut total = 0;
    for c in &m.contexts {
        for a in &c.actions {
            for i in &a.instances {
                total += 1;
                if !seen.insert(i.instance_id.as_str()) {
                    out.push(format!("duplicate instance {}", i.instance_id));
                }
                let pv = &i.provenance;
                let Some((steps, snapshots)) = index.get(&pv.task_id) else {
                    out.push(format!("{}: unknown task {}", i.instance_id, pv.task_id));
                    continue;
                };
                let resolves = match (i.is_taken, pv.step_number, &pv.snapshot_id) {
                    (true, Some(n), _) => n >= 1 && (n as usize) <= *steps,
                    (false, _, Some(s)) => snapshots.contains(s),
                    _ => false,
                };
                if !resolves {
                    out.push(format!("{}: provenance does not resolve", i.instance_id));
                }
            }
        }
    }
    if total != raw_count {
        out.push(format!("{total} instances for {raw_count} raw actions"));
    }
    for w in &m.workflows {
        let steps = index.get(&w.task_id).map_or(0, |(n, _)| *n);
        if w.steps.len() != steps {
            out.push(format!(
                "{}: {} steps for {steps} action events",
                w.workflow_id,
                w.steps.len()
            ));
        }
    }
    out
}

/// Line depth (indent width) and role, `None` for summary or non-node lines.
fn node(line: &str) -> (usize, Option<&str>) {
    let body = line.trim_start();
    let depth = line.len() - body.len();
    if body.is_empty() || body.starts_with("[...](") || body.starts_with(['"', '[']) {
        return (depth, None);
    }
    (depth, body.split_whitespace().next())
}

fn quoted_text(line: &str) -> Option<String> {
    let body = line.trim_start();
    let rest = body[body.find(char::is_whitespace)?..].trim_start();
    if !rest.starts_with('"') {
        return None;
    }
    serde_json::Deserializer::from_str(rest)
        .into_iter::<String>()
        .next()?
        .ok()
}

/// Checks a filtered tree against the sibling, text, and size caps, and
/// that filtering it again changes nothing.
pub fn a11y_failures(filtered: &str, limits: envmap::trace::FilterLimits) -> Vec<String> {
    let mut out = Vec::new();
    let len = filtered.chars().count();
    if len > limits.char_cap {
        out.push(format!(
            "{len} characters exceed the cap of {}",
            limits.char_cap
        ));
    }
    let lines: Vec<&str> = filtered.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if let Some(text) = quoted_text(line) {
            let n = text.chars().count();
            if n > limits.text_limit + 3 || (n > limits.text_limit && !text.ends_with("...")) {
                out.push(format!("line {i}: text of {n} characters"));
            }
        }
        let (depth, Some(role)) = node(line) else {
            continue;
        };
        let mut run = 1;
        for prev in lines[..i].iter().rev() {
            let (d, r) = node(prev);
            if d < depth {
                break;
            }
            if d == depth {
                if r != Some(role) {
                    break;
                }
                run += 1;
            }
        }
        if run > limits.sibling_limit {
            out.push(format!("line {i}: sibling {run} of role {role}"));
        }
    }
    let again = envmap::trace::filter_accessibility_tree(filtered, limits);
    if again != filtered {
        out.push("filter is not idempotent".into());
    }
    out
}

/// Backtracks by definition: after collapsing immediate repeats, visit `k`
/// counts when the same page appears anywhere before visit `k - 1`.
pub fn brute_force_backtracks(visits: &[String]) -> usize {
    let mut pages: Vec<&String> = Vec::new();
    for v in visits {
        if pages.last() != Some(&v) {
            pages.push(v);
        }
    }
    let mut count = 0;
    for k in 2..pages.len() {
        let mut found = false;
        for j in 0..k - 1 {
            if pages[j] == pages[k] {
                found = true;
            }
        }
        if found {
            count += 1;
        }
    }
    count
}

/// A HAR log with one document request per visit, one second apart.
pub fn har_for_visits(visits: &[String]) -> String {
    let entries: Vec<serde_json::Value> = visits
        .iter()
        .enumerate()
        .map(|(i, path)| {
            serde_json::json!({
                "startedDateTime": format!("2024-05-01T10:{:02}:{:02}Z", i / 60, i % 60),
                "request": {"method": "GET", "url": format!("http://localhost:9000{path}")},
                "response": {"status": 200, "content": {"mimeType": "text/html"}},
                "_resourceType": "document"
            })
        })
        .collect();
    serde_json::json!({"log": {"version": "1.2", "entries": entries}}).to_string()
}
