//! Deterministic URL normalization.
//!
//! Scheme, host, query string, and fragment are dropped; each remaining
//! path segment is tested against the rules in priority order and the first
//! matching rule replaces it with a placeholder token.

use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::ids::PLACEHOLDERS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("url {0:?} has no path structure")]
    UnparseableUrl(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RulesError {
    #[error("rules line {line_no}: expected `priority<TAB>pattern<TAB>replacement`")]
    Shape { line_no: usize },
    #[error("rules line {line_no}: bad priority {value:?}")]
    Priority { line_no: usize, value: String },
    #[error("rules line {line_no}: invalid pattern: {message}")]
    Pattern { line_no: usize, message: String },
    #[error("rules line {line_no}: replacement {value:?} is not one of {{id}}, {{uuid}}, {{hash}}, {{slug}}")]
    Replacement { line_no: usize, value: String },
}

#[derive(Clone)]
pub struct NormalizationRule {
    pub rule_id: String,
    /// Regex matched against a whole path segment.
    pub match_pattern: String,
    pub replacement: String,
    pub priority: u32,
    regex: Regex,
}

impl fmt::Debug for NormalizationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalizationRule")
            .field("rule_id", &self.rule_id)
            .field("match_pattern", &self.match_pattern)
            .field("replacement", &self.replacement)
            .field("priority", &self.priority)
            .finish()
    }
}

impl NormalizationRule {
    pub fn new(
        rule_id: impl Into<String>,
        priority: u32,
        match_pattern: &str,
        replacement: &str,
    ) -> Result<Self, String> {
        if !PLACEHOLDERS.contains(&replacement) {
            return Err(format!("unknown replacement {replacement:?}"));
        }
        let regex = Regex::new(&format!("^(?:{match_pattern})$")).map_err(|e| e.to_string())?;
        Ok(Self {
            rule_id: rule_id.into(),
            match_pattern: match_pattern.to_string(),
            replacement: replacement.to_string(),
            priority,
            regex,
        })
    }

    pub fn matches(&self, segment: &str) -> bool {
        self.regex.is_match(segment)
    }
}

#[derive(Debug, Clone)]
pub struct Normalizer {
    rules: Vec<NormalizationRule>,
}

impl Default for Normalizer {
    fn default() -> Self {
        let rule = |id: &str, p, pat: &str, rep: &str| {
            NormalizationRule::new(id, p, pat, rep).expect("default rules are valid")
        };
        Self::new(vec![
            rule("numeric", 1, "[0-9]+", "{id}"),
            rule(
                "uuid",
                2,
                "[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}",
                "{uuid}",
            ),
            rule("hex", 3, "[0-9a-fA-F]{7,}", "{hash}"),
        ])
    }
}

impl Normalizer {
    pub fn new(mut rules: Vec<NormalizationRule>) -> Self {
        rules.sort_by(|a, b| a.priority.cmp(&b.priority).then(a.rule_id.cmp(&b.rule_id)));
        Self { rules }
    }

    pub fn rules(&self) -> &[NormalizationRule] {
        &self.rules
    }

    /// Parses the line format `priority<TAB>match_pattern<TAB>replacement`.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_rules_text(text: &str) -> Result<Self, RulesError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [priority, pattern, replacement] = fields[..] else {
                return Err(RulesError::Shape { line_no });
            };
            let priority: u32 = priority.trim().parse().map_err(|_| RulesError::Priority {
                line_no,
                value: priority.to_string(),
            })?;
            let replacement = replacement.trim();
            if !PLACEHOLDERS.contains(&replacement) {
                return Err(RulesError::Replacement {
                    line_no,
                    value: replacement.to_string(),
                });
            }
            let rule =
                NormalizationRule::new(format!("line{line_no}"), priority, pattern, replacement)
                    .map_err(|message| RulesError::Pattern { line_no, message })?;
            rules.push(rule);
        }
        Ok(Self::new(rules))
    }

    /// Maps a URL to its context pattern, e.g. `/users/123` to `/users/{id}`.
    pub fn normalize(&self, url: &str) -> Result<String, NormalizeError> {
        let path = url_path(url).ok_or_else(|| NormalizeError::UnparseableUrl(url.to_string()))?;
        let mut out = String::with_capacity(path.len());
        for segment in path.split('/').filter(|s| !s.is_empty()) {
            out.push('/');
            if PLACEHOLDERS.contains(&segment) {
                out.push_str(segment);
            } else if let Some(rule) = self.rules.iter().find(|r| r.matches(segment)) {
                out.push_str(&rule.replacement);
            } else {
                out.push_str(segment);
            }
        }
        if out.is_empty() {
            out.push('/');
        }
        Ok(out)
    }
}

/// Path component of an absolute (`scheme://host/...`) or root-relative URL,
/// without query or fragment. `None` when the input has no path structure.
pub fn url_path(url: &str) -> Option<&str> {
    let url = url.trim();
    let rest = if url.starts_with('/') {
        url
    } else {
        let (scheme, after) = url.split_once("://")?;
        let scheme_ok = !scheme.is_empty()
            && scheme.starts_with(|c: char| c.is_ascii_alphabetic())
            && scheme
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
        if !scheme_ok {
            return None;
        }
        match after.find(['/', '?', '#']) {
            Some(i) if after[i..].starts_with('/') => &after[i..],
            _ => "/",
        }
    };
    let end = rest.find(['?', '#']).unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Path used when naming URLs in step text; the input itself if unparseable.
pub fn display_path(url: &str) -> &str {
    match url_path(url) {
        Some("") | None => url,
        Some(p) => p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_rules() {
        let n = Normalizer::default();
        assert_eq!(n.normalize("/users/123").unwrap(), "/users/{id}");
        assert_eq!(n.normalize("/").unwrap(), "/");
        assert_eq!(
            n.normalize("/project/42/issues/7?sort=new").unwrap(),
            "/project/{id}/issues/{id}"
        );
        assert_eq!(
            n.normalize("http://localhost:8023/commit/a1b2c3d4e5#top")
                .unwrap(),
            "/commit/{hash}"
        );
        assert_eq!(
            n.normalize("https://h/x/123e4567-e89b-12d3-a456-426614174000/")
                .unwrap(),
            "/x/{uuid}"
        );
        assert_eq!(n.normalize("http://__GITLAB__").unwrap(), "/");
        assert_eq!(n.normalize("http://h?q=1").unwrap(), "/");
        assert_eq!(n.normalize("//a//b/").unwrap(), "/a/b");
        assert_eq!(n.normalize("/abc12").unwrap(), "/abc12");
    }

    #[test]
    fn unparseable_urls() {
        let n = Normalizer::default();
        for bad in ["", "users/1", "mailto:x@y", "not a url", "://h/x"] {
            assert_eq!(
                n.normalize(bad),
                Err(NormalizeError::UnparseableUrl(bad.to_string()))
            );
        }
    }

    #[test]
    fn rules_file() {
        let text = "# custom\n5\t[a-z]+-[a-z-]+\t{slug}\n1\t[0-9]+\t{id}\n";
        let n = Normalizer::from_rules_text(text).unwrap();
        assert_eq!(n.rules()[0].priority, 1);
        assert_eq!(
            n.normalize("/blog/my-first-post/2").unwrap(),
            "/blog/{slug}/{id}"
        );
        assert_eq!(
            Normalizer::from_rules_text("1\t[0-9]+\t{num}").unwrap_err(),
            RulesError::Replacement {
                line_no: 1,
                value: "{num}".into()
            }
        );
        assert_eq!(
            Normalizer::from_rules_text("1 [0-9]+ {id}").unwrap_err(),
            RulesError::Shape { line_no: 1 }
        );
        assert!(matches!(
            Normalizer::from_rules_text("x\t[0-9]+\t{id}"),
            Err(RulesError::Priority { .. })
        ));
        assert!(matches!(
            Normalizer::from_rules_text("1\t[0-9\t{id}"),
            Err(RulesError::Pattern { .. })
        ));
    }

    #[test]
    fn display_paths() {
        assert_eq!(display_path("http://h:1/a/b?x=1"), "/a/b");
        assert_eq!(display_path("http://h"), "/");
        assert_eq!(display_path("weird"), "weird");
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(path in "(/[a-zA-Z0-9{}._-]{0,12}){0,6}(\\?[a-z=&]{0,8})?") {
            let n = Normalizer::default();
            let url = format!("/{path}");
            let once = n.normalize(&url).unwrap();
            prop_assert_eq!(n.normalize(&once).unwrap(), once);
        }
    }
}
