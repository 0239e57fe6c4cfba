//! Accessibility-tree serialization and size filtering.
//!
//! Trees are written one node per line, depth-first, as
//! `<indent>role "text" [element_id]`, two spaces of indent per level.

use std::collections::HashSet;

use super::{DomSnapshot, InterfaceElement};

const TEXT_MARKER: &str = "...";
const SUMMARY_PREFIX: &str = "[...](";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterLimits {
    /// Same-role siblings kept before the rest collapse into a summary line.
    pub sibling_limit: usize,
    /// Characters of node text kept before truncation.
    pub text_limit: usize,
    /// Hard cap on output length in characters.
    pub char_cap: usize,
}

impl Default for FilterLimits {
    fn default() -> Self {
        Self {
            sibling_limit: 10,
            text_limit: 150,
            char_cap: 20_000,
        }
    }
}

/// Renders a snapshot's element tree in the indented line format.
pub fn serialize_snapshot(snapshot: &DomSnapshot) -> String {
    let referenced: HashSet<&str> = snapshot
        .elements
        .iter()
        .flat_map(|e| e.children.iter().map(String::as_str))
        .collect();
    let mut out = String::new();
    let mut seen = HashSet::new();
    for root in snapshot
        .elements
        .iter()
        .filter(|e| !referenced.contains(e.element_id.as_str()))
    {
        write_node(snapshot, root, 0, &mut seen, &mut out);
    }
    out
}

fn write_node<'a>(
    snapshot: &'a DomSnapshot,
    el: &'a InterfaceElement,
    depth: usize,
    seen: &mut HashSet<&'a str>,
    out: &mut String,
) {
    if !seen.insert(el.element_id.as_str()) {
        return;
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(&el.role);
    out.push(' ');
    out.push_str(&serde_json::to_string(&el.text).expect("strings serialize"));
    out.push_str(" [");
    out.push_str(&el.element_id);
    out.push_str("]\n");
    for child in &el.children {
        if let Some(c) = snapshot.elements.iter().find(|e| &e.element_id == child) {
            write_node(snapshot, c, depth + 1, seen, out);
        }
    }
}

/// A parsed node line. Lines that do not fit the grammar have no role.
struct NodeLine<'a> {
    raw: &'a str,
    depth: usize,
    role: Option<&'a str>,
    /// Byte range of the quoted text (including quotes) within `raw`.
    text_span: Option<(usize, usize)>,
}

fn parse_line(raw: &str) -> NodeLine<'_> {
    let body = raw.trim_start();
    let indent = raw.len() - body.len();
    let depth = raw[..indent].chars().count();
    let mut line = NodeLine {
        raw,
        depth,
        role: None,
        text_span: None,
    };
    if body.is_empty() || body.starts_with(SUMMARY_PREFIX) || body.starts_with(['"', '[']) {
        return line;
    }
    let role_end = body.find(char::is_whitespace).unwrap_or(body.len());
    line.role = Some(&body[..role_end]);
    let after_role = &body[role_end..];
    let rest = after_role.trim_start();
    if rest.starts_with('"') {
        let start = indent + role_end + (after_role.len() - rest.len());
        let mut escaped = false;
        for (i, c) in rest.char_indices().skip(1) {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => {
                    line.text_span = Some((start, start + i + 1));
                    break;
                }
                _ => {}
            }
        }
    }
    line
}

fn truncate_text(line: &NodeLine<'_>, limit: usize) -> Option<String> {
    let (start, end) = line.text_span?;
    let quoted = &line.raw[start..end];
    let text: String =
        serde_json::from_str(quoted).unwrap_or_else(|_| quoted[1..quoted.len() - 1].to_string());
    if text.chars().count() <= limit {
        return None;
    }
    let mut kept: String = text.chars().take(limit).collect();
    kept.push_str(TEXT_MARKER);
    let mut out = String::with_capacity(line.raw.len());
    out.push_str(&line.raw[..start]);
    out.push_str(&serde_json::to_string(&kept).expect("strings serialize"));
    out.push_str(&line.raw[end..]);
    Some(out)
}

struct Run<'a> {
    depth: usize,
    role: Option<&'a str>,
    count: usize,
}

/// Collapses long same-role sibling runs, truncates long texts, and caps size.
///
/// Idempotent: filtering an already filtered tree returns it unchanged.
pub fn filter_accessibility_tree(tree: &str, limits: FilterLimits) -> String {
    let mut kept: Vec<String> = Vec::new();
    let mut runs: Vec<Run<'_>> = Vec::new();
    let mut skip_below: Option<usize> = None;

    for raw in tree.lines() {
        let line = parse_line(raw);
        if let Some(depth) = skip_below {
            if line.depth > depth {
                continue;
            }
            skip_below = None;
        }
        while runs.last().is_some_and(|r| r.depth > line.depth) {
            runs.pop();
        }
        let count = match runs.last_mut() {
            Some(run) if run.depth == line.depth => {
                if line.role.is_some() && run.role == line.role {
                    run.count += 1;
                } else {
                    run.role = line.role;
                    run.count = 1;
                }
                run.count
            }
            _ => {
                runs.push(Run {
                    depth: line.depth,
                    role: line.role,
                    count: 1,
                });
                1
            }
        };
        if count > limits.sibling_limit {
            if count == limits.sibling_limit + 1 {
                let indent = &raw[..raw.len() - raw.trim_start().len()];
                kept.push(format!(
                    "{indent}{SUMMARY_PREFIX}{} elements continue)",
                    line.role.unwrap_or_default()
                ));
            }
            skip_below = Some(line.depth);
            continue;
        }
        kept.push(truncate_text(&line, limits.text_limit).unwrap_or_else(|| raw.to_string()));
    }

    let total: usize =
        kept.iter().map(|l| l.chars().count()).sum::<usize>() + kept.len().saturating_sub(1);
    if total <= limits.char_cap {
        return kept.join("\n");
    }

    let marker = format!(
        "{SUMMARY_PREFIX}output truncated at {} characters)",
        limits.char_cap
    );
    let marker_len = marker.chars().count();
    if marker_len > limits.char_cap {
        return marker.chars().take(limits.char_cap).collect();
    }
    let mut used = marker_len;
    let mut out = String::new();
    for line in &kept {
        let len = line.chars().count() + 1;
        if used + len > limits.char_cap {
            break;
        }
        used += len;
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&marker);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(n: usize, indent: &str) -> String {
        (0..n)
            .map(|i| format!("{indent}row \"Row {i}\" [r{i}]"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn collapses_long_sibling_runs() {
        let tree = format!("table \"Issues\" [t]\n{}", rows(15, "  "));
        let out = filter_accessibility_tree(&tree, FilterLimits::default());
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[10], "  row \"Row 9\" [r9]");
        assert_eq!(lines[11], "  [...](row elements continue)");
    }

    #[test]
    fn dropped_siblings_take_their_subtrees() {
        let mut tree = String::new();
        for i in 0..12 {
            tree.push_str(&format!(
                "listitem \"Item {i}\" [li{i}]\n  link \"Open {i}\" [a{i}]\n"
            ));
        }
        tree.push_str("button \"More\" [more]");
        let out = filter_accessibility_tree(&tree, FilterLimits::default());
        assert!(out.contains("[a9]"));
        assert!(!out.contains("[a10]"));
        assert!(out.ends_with("[...](listitem elements continue)\nbutton \"More\" [more]"));
    }

    #[test]
    fn exactly_limit_siblings_untouched() {
        let tree = rows(10, "");
        assert_eq!(
            filter_accessibility_tree(&tree, FilterLimits::default()),
            tree
        );
    }

    #[test]
    fn truncates_long_text() {
        let text = "x".repeat(200);
        let tree = format!("paragraph \"{text}\" [p1]");
        let out = filter_accessibility_tree(&tree, FilterLimits::default());
        assert_eq!(out, format!("paragraph \"{}...\" [p1]", "x".repeat(150)));
    }

    #[test]
    fn enforces_char_cap_on_line_boundaries() {
        let tree = (0..250)
            .map(|i| {
                let role = if i % 2 == 0 { "generic" } else { "paragraph" };
                format!("{role} \"{}\" [g{i}]", "y".repeat(100))
            })
            .collect::<Vec<_>>()
            .join("\n");
        assert!(tree.len() > 25_000);
        let out = filter_accessibility_tree(&tree, FilterLimits::default());
        assert!(out.chars().count() <= 20_000);
        assert!(out.ends_with("\n[...](output truncated at 20000 characters)"));
        for l in out.lines().filter(|l| !l.starts_with("[...]")) {
            assert!(l.ends_with(']'), "partial line {l:?}");
        }
    }

    #[test]
    fn empty_input() {
        assert_eq!(filter_accessibility_tree("", FilterLimits::default()), "");
    }

    #[test]
    fn escaped_quotes_in_text() {
        let tree = format!("link \"say \\\"{}\\\"\" [a]", "z".repeat(160));
        let out = filter_accessibility_tree(&tree, FilterLimits::default());
        let once = filter_accessibility_tree(&out, FilterLimits::default());
        assert_eq!(out, once);
        assert!(out.ends_with("...\" [a]"));
    }

    #[test]
    fn snapshot_serialization_is_depth_first() {
        let el = |id: &str, role: &str, text: &str, children: &[&str]| InterfaceElement {
            element_id: id.into(),
            role: role.into(),
            text: text.into(),
            interactable: false,
            children: children.iter().map(|c| c.to_string()).collect(),
        };
        let snap = DomSnapshot {
            snapshot_id: "s".into(),
            url: "/".into(),
            capture_index: 0,
            elements: vec![
                el("m", "main", "", &["l1", "b"]),
                el("b", "button", "Go", &[]),
                el("l1", "list", "", &["i1"]),
                el("i1", "listitem", "One", &[]),
            ],
        };
        assert_eq!(
            serialize_snapshot(&snap),
            "main \"\" [m]\n  list \"\" [l1]\n    listitem \"One\" [i1]\n  button \"Go\" [b]\n"
        );
    }

    fn arb_tree() -> impl Strategy<Value = String> {
        let line = (
            0usize..4,
            prop::sample::select(vec!["row", "link", "cell", "button"]),
            0usize..220,
            0u32..1000,
        );
        prop::collection::vec(line, 0..120).prop_map(|lines| {
            lines
                .into_iter()
                .map(|(d, role, len, id)| {
                    format!("{}{role} \"{}\" [e{id}]", "  ".repeat(d), "t".repeat(len))
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
    }

    proptest! {
        #[test]
        fn filter_properties(tree in arb_tree(), cap in 40usize..6000) {
            let limits = FilterLimits { sibling_limit: 3, text_limit: 50, char_cap: cap };
            let out = filter_accessibility_tree(&tree, limits);
            prop_assert!(out.chars().count() <= cap);
            prop_assert_eq!(filter_accessibility_tree(&out, limits), out.clone());
            let input_ids: HashSet<&str> = tree.lines().filter_map(|l| l.rsplit_once(" [").map(|x| x.1)).collect();
            for l in out.lines().filter(|l| !l.trim_start().starts_with('[')) {
                let id = l.rsplit_once(" [").unwrap().1;
                prop_assert!(input_ids.contains(id));
            }
        }
    }
}
