//! Canonical trajectory format.
//!
//! A trajectory file is UTF-8 with one JSON record per line. Line 1 is a
//! header `{"task_id", "environment", "base_url"}`; every later line is an
//! event (`"kind": "event"`) or a snapshot (`"kind": "snapshot"`) record.
//! Snapshots are emitted right after the event they follow.

mod a11y;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use a11y::{filter_accessibility_tree, serialize_snapshot, FilterLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    Click,
    Type,
    Scroll,
    Navigate,
    Select,
    Key,
    Utterance,
}

impl ActionType {
    pub const ALL: [ActionType; 7] = [
        ActionType::Click,
        ActionType::Type,
        ActionType::Scroll,
        ActionType::Navigate,
        ActionType::Select,
        ActionType::Key,
        ActionType::Utterance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionType::Click => "click",
            ActionType::Type => "type",
            ActionType::Scroll => "scroll",
            ActionType::Navigate => "navigate",
            ActionType::Select => "select",
            ActionType::Key => "key",
            ActionType::Utterance => "utterance",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One low-level interaction event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub index: u64,
    /// Milliseconds since session start.
    pub timestamp: u64,
    pub action_type: ActionType,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_ref: Option<String>,
}

impl RawEvent {
    pub fn is_utterance(&self) -> bool {
        self.action_type == ActionType::Utterance
    }

    /// Visible text of the target, falling back to its selector.
    pub fn target_label(&self) -> Option<&str> {
        self.element_text
            .as_deref()
            .filter(|t| !t.trim().is_empty())
            .or(self.selector.as_deref().filter(|s| !s.trim().is_empty()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceElement {
    pub element_id: String,
    pub role: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub interactable: bool,
    #[serde(default)]
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomSnapshot {
    pub snapshot_id: String,
    pub url: String,
    /// Index of the event this snapshot was captured after.
    pub capture_index: u64,
    #[serde(default)]
    pub elements: Vec<InterfaceElement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub task_id: String,
    pub environment: String,
    pub base_url: String,
    pub events: Vec<RawEvent>,
    pub snapshots: BTreeMap<String, DomSnapshot>,
}

impl Trajectory {
    pub fn new(task_id: impl Into<String>, environment: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            environment: environment.into(),
            base_url: String::new(),
            events: Vec::new(),
            snapshots: BTreeMap::new(),
        }
    }

    /// Label recorded as the `source` of provenance records.
    pub fn source_label(&self) -> String {
        format!("{}/{}", self.environment, self.task_id)
    }

    pub fn action_events(&self) -> impl Iterator<Item = &RawEvent> {
        self.events.iter().filter(|e| !e.is_utterance())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyTaskId,
    NonMonotonicIndex {
        position: usize,
        index: u64,
    },
    NonMonotonicTimestamp {
        position: usize,
        timestamp: u64,
    },
    EmptyUrl {
        index: u64,
    },
    DanglingSnapshotRef {
        index: u64,
        snapshot_ref: String,
    },
    SnapshotKeyMismatch {
        key: String,
        snapshot_id: String,
    },
    DuplicateElementId {
        snapshot_id: String,
        element_id: String,
    },
    UnknownChild {
        snapshot_id: String,
        element_id: String,
        child: String,
    },
    ChildCycle {
        snapshot_id: String,
        element_id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyTaskId => write!(f, "task_id is empty"),
            Violation::NonMonotonicIndex { position, index } => {
                write!(
                    f,
                    "event at position {position} has non-increasing index {index}"
                )
            }
            Violation::NonMonotonicTimestamp {
                position,
                timestamp,
            } => {
                write!(
                    f,
                    "event at position {position} has decreasing timestamp {timestamp}"
                )
            }
            Violation::EmptyUrl { index } => write!(f, "event {index} has an empty url"),
            Violation::DanglingSnapshotRef {
                index,
                snapshot_ref,
            } => {
                write!(
                    f,
                    "event {index} references missing snapshot {snapshot_ref:?}"
                )
            }
            Violation::SnapshotKeyMismatch { key, snapshot_id } => {
                write!(f, "snapshot stored under {key:?} has id {snapshot_id:?}")
            }
            Violation::DuplicateElementId {
                snapshot_id,
                element_id,
            } => {
                write!(
                    f,
                    "snapshot {snapshot_id}: duplicate element {element_id:?}"
                )
            }
            Violation::UnknownChild {
                snapshot_id,
                element_id,
                child,
            } => write!(
                f,
                "snapshot {snapshot_id}: element {element_id:?} lists unknown child {child:?}"
            ),
            Violation::ChildCycle {
                snapshot_id,
                element_id,
            } => {
                write!(
                    f,
                    "snapshot {snapshot_id}: child cycle through {element_id:?}"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line_no}: malformed record: {message}")]
    MalformedRecord { line_no: usize, message: String },
    #[error("first record is not a header with a non-empty task_id")]
    MissingHeader,
    #[error("event {0} references a snapshot that is not in the trajectory")]
    DanglingSnapshotRef(u64),
    #[error("line {line_no}: duplicate snapshot id {snapshot_id:?}")]
    DuplicateSnapshot { line_no: usize, snapshot_id: String },
    #[error("invalid trajectory: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    task_id: String,
    environment: String,
    #[serde(default)]
    base_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Event(RawEvent),
    Snapshot(DomSnapshot),
}

/// Parses a line-delimited event log into a validated trajectory.
pub fn parse_trajectory(source: &str) -> Result<Trajectory, TraceError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header_text) = lines.next().ok_or(TraceError::MissingHeader)?;
    let header_value: serde_json::Value =
        serde_json::from_str(header_text).map_err(|e| TraceError::MalformedRecord {
            line_no: header_line,
            message: e.to_string(),
        })?;
    let has_task = header_value
        .get("task_id")
        .and_then(|v| v.as_str())
        .is_some_and(|s| !s.is_empty());
    if !has_task {
        return Err(TraceError::MissingHeader);
    }
    let header: Header =
        serde_json::from_value(header_value).map_err(|e| TraceError::MalformedRecord {
            line_no: header_line,
            message: e.to_string(),
        })?;

    let mut trajectory = Trajectory {
        task_id: header.task_id,
        environment: header.environment,
        base_url: header.base_url,
        events: Vec::new(),
        snapshots: BTreeMap::new(),
    };
    for (line_no, text) in lines {
        let record: Record =
            serde_json::from_str(text).map_err(|e| TraceError::MalformedRecord {
                line_no,
                message: e.to_string(),
            })?;
        match record {
            Record::Event(e) => trajectory.events.push(e),
            Record::Snapshot(s) => {
                if trajectory.snapshots.contains_key(&s.snapshot_id) {
                    return Err(TraceError::DuplicateSnapshot {
                        line_no,
                        snapshot_id: s.snapshot_id,
                    });
                }
                trajectory.snapshots.insert(s.snapshot_id.clone(), s);
            }
        }
    }

    if let Some(e) = trajectory.events.iter().find(|e| {
        e.snapshot_ref
            .as_ref()
            .is_some_and(|r| !trajectory.snapshots.contains_key(r))
    }) {
        return Err(TraceError::DanglingSnapshotRef(e.index));
    }
    let violations = validate_trajectory(&trajectory);
    if !violations.is_empty() {
        return Err(TraceError::Invalid(violations));
    }
    Ok(trajectory)
}

/// Writes a trajectory in the canonical line format.
pub fn serialize_trajectory(t: &Trajectory) -> String {
    let mut out = String::new();
    let header = Header {
        task_id: t.task_id.clone(),
        environment: t.environment.clone(),
        base_url: t.base_url.clone(),
    };
    push_line(&mut out, &header);

    let mut by_capture: BTreeMap<u64, Vec<&DomSnapshot>> = BTreeMap::new();
    for s in t.snapshots.values() {
        by_capture.entry(s.capture_index).or_default().push(s);
    }
    let event_indices: HashSet<u64> = t.events.iter().map(|e| e.index).collect();
    for e in &t.events {
        push_line(&mut out, &Record::Event(e.clone()));
        if let Some(snaps) = by_capture.get(&e.index) {
            for s in snaps {
                push_line(&mut out, &Record::Snapshot((*s).clone()));
            }
        }
    }
    for (capture, snaps) in &by_capture {
        if !event_indices.contains(capture) {
            for s in snaps {
                push_line(&mut out, &Record::Snapshot((*s).clone()));
            }
        }
    }
    out
}

fn push_line<T: Serialize>(out: &mut String, value: &T) {
    out.push_str(&serde_json::to_string(value).expect("trajectory records serialize"));
    out.push('\n');
}

/// Reports every invariant breach; an empty list means the trajectory is valid.
pub fn validate_trajectory(t: &Trajectory) -> Vec<Violation> {
    let mut out = Vec::new();
    if t.task_id.is_empty() {
        out.push(Violation::EmptyTaskId);
    }
    for (position, pair) in t.events.windows(2).enumerate() {
        if pair[1].index <= pair[0].index {
            out.push(Violation::NonMonotonicIndex {
                position: position + 1,
                index: pair[1].index,
            });
        }
        if pair[1].timestamp < pair[0].timestamp {
            out.push(Violation::NonMonotonicTimestamp {
                position: position + 1,
                timestamp: pair[1].timestamp,
            });
        }
    }
    for e in &t.events {
        if !e.is_utterance() && e.url.trim().is_empty() {
            out.push(Violation::EmptyUrl { index: e.index });
        }
        if let Some(r) = &e.snapshot_ref {
            if !t.snapshots.contains_key(r) {
                out.push(Violation::DanglingSnapshotRef {
                    index: e.index,
                    snapshot_ref: r.clone(),
                });
            }
        }
    }
    for (key, s) in &t.snapshots {
        if key != &s.snapshot_id {
            out.push(Violation::SnapshotKeyMismatch {
                key: key.clone(),
                snapshot_id: s.snapshot_id.clone(),
            });
        }
        validate_elements(s, &mut out);
    }
    out
}

fn validate_elements(s: &DomSnapshot, out: &mut Vec<Violation>) {
    let mut by_id: HashMap<&str, &InterfaceElement> = HashMap::new();
    for el in &s.elements {
        if by_id.contains_key(el.element_id.as_str()) {
            out.push(Violation::DuplicateElementId {
                snapshot_id: s.snapshot_id.clone(),
                element_id: el.element_id.clone(),
            });
        } else {
            by_id.insert(el.element_id.as_str(), el);
        }
    }
    for el in &s.elements {
        for child in &el.children {
            if !by_id.contains_key(child.as_str()) {
                out.push(Violation::UnknownChild {
                    snapshot_id: s.snapshot_id.clone(),
                    element_id: el.element_id.clone(),
                    child: child.clone(),
                });
            }
        }
    }
    // Three-colour DFS over the child relation.
    let mut state: HashMap<&str, u8> = HashMap::new();
    for el in &s.elements {
        if state.contains_key(el.element_id.as_str()) {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(el.element_id.as_str(), 0)];
        state.insert(el.element_id.as_str(), 1);
        while let Some((id, next)) = stack.pop() {
            let children = by_id.get(id).map(|e| e.children.as_slice()).unwrap_or(&[]);
            if next < children.len() {
                stack.push((id, next + 1));
                let child = children[next].as_str();
                if !by_id.contains_key(child) {
                    continue;
                }
                match state.get(child) {
                    Some(1) => out.push(Violation::ChildCycle {
                        snapshot_id: s.snapshot_id.clone(),
                        element_id: child.to_string(),
                    }),
                    Some(_) => {}
                    None => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                    }
                }
            } else {
                state.insert(id, 2);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"task_id":"task_1","environment":"gitlab","base_url":"__GITLAB__"}"#;

    fn click(index: u64, url: &str) -> RawEvent {
        RawEvent {
            index,
            timestamp: index * 100,
            action_type: ActionType::Click,
            url: url.to_string(),
            selector: None,
            element_text: Some("Go".into()),
            element_role: Some("link".into()),
            value: None,
            utterance: None,
            snapshot_ref: None,
        }
    }

    #[test]
    fn parses_minimal_log() {
        let src = format!(
            "{HEADER}\n{}\n{}\n{}\n",
            r#"{"kind":"event","index":0,"timestamp":0,"action_type":"click","url":"http://h/a"}"#,
            r#"{"kind":"event","index":1,"timestamp":5,"action_type":"click","url":"http://h/b"}"#,
            r#"{"kind":"event","index":2,"timestamp":9,"action_type":"click","url":"http://h/c"}"#,
        );
        let t = parse_trajectory(&src).unwrap();
        assert_eq!(t.task_id, "task_1");
        assert_eq!(t.base_url, "__GITLAB__");
        let idx: Vec<u64> = t.events.iter().map(|e| e.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn header_only_is_empty_trajectory() {
        let t = parse_trajectory(HEADER).unwrap();
        assert!(t.events.is_empty());
        assert!(t.snapshots.is_empty());
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse_trajectory(""),
            Err(TraceError::MissingHeader)
        ));
        assert!(matches!(
            parse_trajectory(r#"{"environment":"gitlab"}"#),
            Err(TraceError::MissingHeader)
        ));
        assert!(matches!(
            parse_trajectory("not json"),
            Err(TraceError::MalformedRecord { line_no: 1, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = format!("{HEADER}\n\n{{\"kind\":\"event\",\"index\":0}}\n");
        match parse_trajectory(&src) {
            Err(TraceError::MalformedRecord { line_no, .. }) => assert_eq!(line_no, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_snapshot_ref() {
        let src = format!(
            "{HEADER}\n{}\n",
            r#"{"kind":"event","index":4,"timestamp":0,"action_type":"click","url":"http://h/","snapshot_ref":"s9"}"#
        );
        assert!(matches!(
            parse_trajectory(&src),
            Err(TraceError::DanglingSnapshotRef(4))
        ));
    }

    #[test]
    fn validation_counter_fixtures() {
        let mut t = Trajectory::new("task_1", "gitlab");
        t.events = vec![click(0, "/a"), click(2, "/b"), click(1, "/c")];
        t.events[2].timestamp = 300;
        assert_eq!(
            validate_trajectory(&t),
            vec![Violation::NonMonotonicIndex {
                position: 2,
                index: 1
            }]
        );

        let mut t = Trajectory::new("task_1", "gitlab");
        t.events = vec![click(0, "/a"), click(1, "")];
        assert_eq!(
            validate_trajectory(&t),
            vec![Violation::EmptyUrl { index: 1 }]
        );

        let mut u = click(2, "");
        u.action_type = ActionType::Utterance;
        t.events[1].url = "/b".into();
        t.events.push(u);
        assert!(validate_trajectory(&t).is_empty());
    }

    #[test]
    fn element_graph_violations() {
        let el = |id: &str, children: &[&str]| InterfaceElement {
            element_id: id.into(),
            role: "generic".into(),
            text: String::new(),
            interactable: false,
            children: children.iter().map(|c| c.to_string()).collect(),
        };
        let mut t = Trajectory::new("task_1", "gitlab");
        t.snapshots.insert(
            "s1".into(),
            DomSnapshot {
                snapshot_id: "s1".into(),
                url: "/".into(),
                capture_index: 0,
                elements: vec![el("a", &["b"]), el("b", &["a", "zz"]), el("b", &[])],
            },
        );
        let v = validate_trajectory(&t);
        assert!(v.contains(&Violation::DuplicateElementId {
            snapshot_id: "s1".into(),
            element_id: "b".into()
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::UnknownChild { child, .. } if child == "zz")));
        assert!(v.iter().any(|x| matches!(x, Violation::ChildCycle { .. })));
    }

    #[test]
    fn serialize_round_trips() {
        let mut t = Trajectory::new("task_7", "shop");
        t.base_url = "__SHOP__".into();
        t.events = vec![click(0, "http://h/a"), click(3, "http://h/b")];
        t.events[1].snapshot_ref = Some("s1".into());
        t.snapshots.insert(
            "s1".into(),
            DomSnapshot {
                snapshot_id: "s1".into(),
                url: "http://h/b".into(),
                capture_index: 3,
                elements: vec![],
            },
        );
        t.snapshots.insert(
            "s0".into(),
            DomSnapshot {
                snapshot_id: "s0".into(),
                url: "http://h/".into(),
                capture_index: 99,
                elements: vec![],
            },
        );
        let text = serialize_trajectory(&t);
        assert_eq!(parse_trajectory(&text).unwrap(), t);
    }
}
