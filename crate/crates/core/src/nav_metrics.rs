//! Navigation metrics from HTTP archive (HAR 1.2) logs.

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::Normalizer;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HarError {
    #[error("malformed HAR at `{path}`: {message}")]
    MalformedHar { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Document,
    Xhr,
    Asset,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarEntry {
    pub started_at: DateTime<FixedOffset>,
    pub method: String,
    pub url: String,
    pub resource_kind: ResourceKind,
    pub status: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavigationMetrics {
    /// Normalized document URLs with consecutive repeats collapsed.
    pub page_visits: Vec<String>,
    pub backtracks: usize,
    pub backtracking_rate: f64,
    pub total_requests: usize,
}

#[derive(Deserialize)]
struct Har {
    log: HarLog,
}

#[derive(Deserialize)]
struct HarLog {
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    #[serde(rename = "startedDateTime")]
    started: String,
    request: RawRequest,
    response: RawResponse,
    #[serde(rename = "_resourceType", default)]
    resource_type: Option<String>,
}

#[derive(Deserialize)]
struct RawRequest {
    method: String,
    url: String,
}

#[derive(Deserialize)]
struct RawResponse {
    status: i64,
    #[serde(default)]
    content: Option<RawContent>,
}

#[derive(Deserialize)]
struct RawContent {
    #[serde(rename = "mimeType", default)]
    mime_type: Option<String>,
}

fn classify(resource_type: Option<&str>, mime: Option<&str>) -> ResourceKind {
    if let Some(t) = resource_type {
        return match t.to_ascii_lowercase().as_str() {
            "document" => ResourceKind::Document,
            "xhr" | "fetch" => ResourceKind::Xhr,
            "script" | "stylesheet" | "image" | "font" | "media" => ResourceKind::Asset,
            _ => ResourceKind::Other,
        };
    }
    let mime = mime.unwrap_or_default().to_ascii_lowercase();
    if mime.starts_with("text/html") || mime.starts_with("application/xhtml") {
        ResourceKind::Document
    } else if mime.contains("json") {
        ResourceKind::Xhr
    } else if mime.contains("javascript")
        || mime.starts_with("text/css")
        || mime.starts_with("image/")
        || mime.starts_with("font/")
        || mime.starts_with("audio/")
        || mime.starts_with("video/")
    {
        ResourceKind::Asset
    } else {
        ResourceKind::Other
    }
}

/// Entries of a HAR log, stably ordered by start time.
pub fn parse_har(source: &str) -> Result<Vec<HarEntry>, HarError> {
    let de = &mut serde_json::Deserializer::from_str(source);
    let har: Har = serde_path_to_error::deserialize(de).map_err(|e| HarError::MalformedHar {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let mut entries = Vec::with_capacity(har.log.entries.len());
    for (i, e) in har.log.entries.into_iter().enumerate() {
        let started_at =
            DateTime::parse_from_rfc3339(&e.started).map_err(|err| HarError::MalformedHar {
                path: format!("log.entries[{i}].startedDateTime"),
                message: err.to_string(),
            })?;
        let mime = e
            .response
            .content
            .as_ref()
            .and_then(|c| c.mime_type.as_deref());
        entries.push(HarEntry {
            started_at,
            resource_kind: classify(e.resource_type.as_deref(), mime),
            method: e.request.method,
            url: e.request.url,
            status: e.response.status,
        });
    }
    entries.sort_by_key(|e| e.started_at);
    Ok(entries)
}

/// Transitions that return to a page left earlier: visit `j + 1` appears
/// among visits `0..j`.
pub fn count_backtracks<T: PartialEq>(visits: &[T]) -> usize {
    (1..visits.len())
        .filter(|&k| visits[..k - 1].contains(&visits[k]))
        .count()
}

pub fn compute_metrics(entries: &[HarEntry], normalizer: &Normalizer) -> NavigationMetrics {
    let mut page_visits: Vec<String> = Vec::new();
    for e in entries
        .iter()
        .filter(|e| e.resource_kind == ResourceKind::Document)
    {
        let page = normalizer
            .normalize(&e.url)
            .unwrap_or_else(|_| e.url.clone());
        if page_visits.last() != Some(&page) {
            page_visits.push(page);
        }
    }
    let backtracks = count_backtracks(&page_visits);
    let transitions = page_visits.len().saturating_sub(1).max(1);
    NavigationMetrics {
        backtracking_rate: backtracks as f64 / transitions as f64,
        backtracks,
        page_visits,
        total_requests: entries.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn har(docs: &[&str]) -> String {
        let entries: Vec<String> = docs
            .iter()
            .enumerate()
            .map(|(i, url)| {
                format!(
                    r#"{{"startedDateTime":"2024-05-01T10:00:{i:02}.000Z","request":{{"method":"GET","url":"http://h{url}"}},"response":{{"status":200,"content":{{"mimeType":"text/html"}}}},"_resourceType":"document"}}"#
                )
            })
            .collect();
        format!(
            r#"{{"log":{{"version":"1.2","entries":[{}]}}}}"#,
            entries.join(",")
        )
    }

    fn rate(docs: &[&str]) -> f64 {
        compute_metrics(&parse_har(&har(docs)).unwrap(), &Normalizer::default()).backtracking_rate
    }

    #[test]
    fn oracles() {
        assert_eq!(rate(&["/a", "/b", "/a"]), 0.5);
        assert_eq!(rate(&["/a", "/b", "/c", "/b", "/a"]), 0.5);
        assert_eq!(rate(&["/a"]), 0.0);
        assert_eq!(rate(&[]), 0.0);
        assert_eq!(rate(&["/a", "/a", "/b"]), 0.0);
        assert_eq!(rate(&["/users/1", "/x", "/users/2"]), 0.5);
    }

    #[test]
    fn classification_and_ordering() {
        let src = r#"{"log":{"entries":[
            {"startedDateTime":"2024-05-01T10:00:02Z","request":{"method":"GET","url":"http://h/app.js"},"response":{"status":200,"content":{"mimeType":"application/javascript"}}},
            {"startedDateTime":"2024-05-01T10:00:01+00:00","request":{"method":"POST","url":"http://h/api"},"response":{"status":201},"_resourceType":"fetch"},
            {"startedDateTime":"2024-05-01T10:00:03Z","request":{"method":"GET","url":"http://h/x"},"response":{"status":404},"_resourceType":"ping"}
        ]}}"#;
        let e = parse_har(src).unwrap();
        let kinds: Vec<ResourceKind> = e.iter().map(|e| e.resource_kind).collect();
        assert_eq!(
            kinds,
            [ResourceKind::Xhr, ResourceKind::Asset, ResourceKind::Other]
        );
        assert_eq!(e[0].method, "POST");
        assert_eq!(e[2].status, 404);
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            parse_har("{}"),
            Err(HarError::MalformedHar { .. })
        ));
        let bad_time = r#"{"log":{"entries":[{"startedDateTime":"yesterday","request":{"method":"GET","url":"/"},"response":{"status":200}}]}}"#;
        match parse_har(bad_time) {
            Err(HarError::MalformedHar { path, .. }) => {
                assert_eq!(path, "log.entries[0].startedDateTime")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_har(r#"{"log":{"entries":[]}}"#).unwrap(), vec![]);
    }
}
