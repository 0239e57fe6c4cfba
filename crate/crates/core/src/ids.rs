//! Stable identifiers for map entities.
//!
//! Every ID is a pure function of the entity's defining data (environment,
//! URL pattern, verb, role, task and step numbers), so independent builds
//! over overlapping recordings agree on names and can be merged by ID.

use std::sync::OnceLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::trace::ActionType;

/// Placeholder tokens that normalization rules may emit.
pub const PLACEHOLDERS: [&str; 4] = ["{id}", "{uuid}", "{hash}", "{slug}"];

/// Lowercases and maps every run of characters outside `[a-z0-9]` to one `_`.
pub fn sanitize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_sep = false;
    for c in raw.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(c);
        } else {
            pending_sep = true;
        }
    }
    if out.is_empty() {
        out.push('x');
    }
    out
}

fn placeholder_word(segment: &str) -> Option<&str> {
    PLACEHOLDERS
        .iter()
        .find(|p| **p == segment)
        .map(|p| &p[1..p.len() - 1])
}

/// Readable slug for a URL pattern: `/` becomes `main`, segments join with `_`.
///
/// When the readable form could collide with another pattern (literal
/// segments that are not plain lowercase alphanumerics, or that spell a
/// placeholder word), a short digest of the pattern is appended.
pub fn pattern_slug(pattern: &str) -> String {
    let segments: Vec<&str> = pattern.split('/').filter(|s| !s.is_empty()).collect();
    if segments.is_empty() {
        return "main".to_string();
    }
    let mut plain = true;
    let mut parts = Vec::with_capacity(segments.len());
    for seg in &segments {
        if let Some(word) = placeholder_word(seg) {
            parts.push(word.to_string());
            continue;
        }
        let simple = seg
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit());
        let reserved = seg.eq_ignore_ascii_case("main")
            || PLACEHOLDERS
                .iter()
                .any(|p| p[1..p.len() - 1].eq_ignore_ascii_case(seg));
        if !simple || reserved {
            plain = false;
        }
        parts.push(sanitize(seg));
    }
    let mut slug = parts.join("_");
    if !plain {
        let digest = Sha256::digest(pattern.as_bytes());
        slug.push_str("_h");
        for b in &digest[..4] {
            slug.push_str(&format!("{b:02x}"));
        }
    }
    slug
}

pub fn context_name(env: &str, pattern: &str) -> String {
    format!("{}_{}", sanitize(env), pattern_slug(pattern))
}

pub fn context_id(env: &str, pattern: &str) -> String {
    format!("context.{}", context_name(env, pattern))
}

/// Sanitized element role, `element` when absent.
pub fn role_key(role: Option<&str>) -> String {
    match role {
        Some(r) if !r.trim().is_empty() => sanitize(r),
        _ => "element".to_string(),
    }
}

/// `action.<context name>_<verb>_<role>`; one per equivalence class.
pub fn action_id(context_id: &str, verb: ActionType, role: &str) -> String {
    let ctx = context_id.strip_prefix("context.").unwrap_or(context_id);
    format!("action.{ctx}_{}_{role}", verb.as_str())
}

/// Recovers `(verb, role)` from an action ID minted by [`action_id`].
pub fn decode_action_id(action_id: &str, context_id: &str) -> Option<(ActionType, String)> {
    let ctx = context_id.strip_prefix("context.")?;
    let rest = action_id.strip_prefix("action.")?.strip_prefix(ctx)?;
    let rest = rest.strip_prefix('_')?;
    let (verb, role) = rest.split_once('_')?;
    let verb = ActionType::from_str_opt(verb)?;
    if verb == ActionType::Utterance || role.is_empty() {
        return None;
    }
    Some((verb, role.to_string()))
}

pub fn instance_id(task_id: &str, step: u32, idx: u32) -> String {
    format!("instance.{}_{step}_{idx}", sanitize(task_id))
}

pub fn workflow_id(env: &str, task_id: &str) -> String {
    format!("workflow.{}_{}", sanitize(env), sanitize(task_id))
}

pub fn definition_id(term: &str) -> String {
    format!("definition.{}", sanitize(term))
}

pub fn procedure_id(context_id: &str) -> String {
    let ctx = context_id.strip_prefix("context.").unwrap_or(context_id);
    format!("procedure.{ctx}")
}

pub fn map_id(env: &str) -> String {
    format!("env-map-{}", sanitize(env))
}

/// ID families with their grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdFamily {
    Context,
    Action,
    Instance,
    Workflow,
    Definition,
    Procedure,
}

impl IdFamily {
    fn regex(self) -> &'static Regex {
        static RES: OnceLock<[Regex; 6]> = OnceLock::new();
        let res = RES.get_or_init(|| {
            [
                Regex::new(r"^context\.[a-z0-9_]+$").unwrap(),
                Regex::new(r"^action\.[a-z0-9_]+$").unwrap(),
                Regex::new(r"^instance\.[a-z0-9_]+_[0-9]+_[0-9]+$").unwrap(),
                Regex::new(r"^workflow\.[a-z0-9_]+$").unwrap(),
                Regex::new(r"^definition\.[a-z0-9_]+$").unwrap(),
                Regex::new(r"^procedure\.[a-z0-9_]+$").unwrap(),
            ]
        });
        &res[self as usize]
    }

    pub fn matches(self, id: &str) -> bool {
        self.regex().is_match(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_collapses_separators() {
        assert_eq!(sanitize("Task 103"), "task_103");
        assert_eq!(sanitize("--GitLab--CE"), "gitlab_ce");
        assert_eq!(sanitize("***"), "x");
    }

    #[test]
    fn slugs_for_plain_patterns() {
        assert_eq!(pattern_slug("/"), "main");
        assert_eq!(pattern_slug("/search"), "search");
        assert_eq!(pattern_slug("/users/{id}"), "users_id");
        assert_eq!(context_id("gitlab", "/"), "context.gitlab_main");
        assert_eq!(context_id("gitlab", "/search"), "context.gitlab_search");
    }

    #[test]
    fn ambiguous_literals_get_a_digest() {
        let a = pattern_slug("/users/id");
        let b = pattern_slug("/users/{id}");
        assert_ne!(a, b);
        assert!(a.starts_with("users_id_h"));
        assert_ne!(pattern_slug("/a_b"), pattern_slug("/a/b"));
        assert_ne!(pattern_slug("/main"), pattern_slug("/"));
        assert!(IdFamily::Context.matches(&context_id("gitlab", "/Merge-Requests")));
    }

    #[test]
    fn action_ids_round_trip() {
        let ctx = context_id("gitlab", "/projects/{id}/issues");
        let id = action_id(&ctx, ActionType::Click, "menu_item");
        assert_eq!(id, "action.gitlab_projects_id_issues_click_menu_item");
        assert_eq!(
            decode_action_id(&id, &ctx),
            Some((ActionType::Click, "menu_item".to_string()))
        );
        assert_eq!(decode_action_id(&id, "context.other"), None);
    }

    #[test]
    fn families() {
        assert!(IdFamily::Instance.matches(&instance_id("task_103", 4, 0)));
        assert!(!IdFamily::Instance.matches("instance.task_x"));
        assert!(IdFamily::Workflow.matches(&workflow_id("gitlab", "task_103")));
        assert!(!IdFamily::Context.matches("context.Bad-Id"));
    }
}
