//! Seeded synthetic trajectories for property and performance tests.
//!
//! Trajectories wander over a small fake site: a home page, a search page,
//! user profiles, and `sections` groups of list and item pages. Every event
//! URL is absolute, snapshots describe the page the event left the browser
//! on, and roughly one event in ten is narration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use envmap::map::{Definition, EnvironmentMap, KnowledgeOrigin};
use envmap::trace::{ActionType, DomSnapshot, InterfaceElement, RawEvent, Trajectory};
use envmap::Pipeline;

pub mod laws;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HOST: &str = "http://localhost:9000";

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    /// Number of section groups; each adds a list and an item page pattern.
    pub sections: usize,
    pub max_events: usize,
    pub snapshot_probability: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            sections: 3,
            max_events: 24,
            snapshot_probability: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
struct Page {
    path: String,
    elements: Vec<InterfaceElement>,
}

fn element(id: &str, role: &str, text: &str) -> InterfaceElement {
    InterfaceElement {
        element_id: id.to_string(),
        role: role.to_string(),
        text: text.to_string(),
        interactable: role != "main" && role != "heading",
        children: Vec::new(),
    }
}

fn page(path: String, items: Vec<InterfaceElement>) -> Page {
    let mut root = element("main", "main", "");
    root.children = items.iter().map(|e| e.element_id.clone()).collect();
    let mut elements = vec![root];
    elements.extend(items);
    Page { path, elements }
}

fn random_page(rng: &mut impl Rng, cfg: &GenConfig) -> Page {
    let section = rng.gen_range(0..cfg.sections.max(1));
    match rng.gen_range(0..5) {
        0 => page(
            "/".into(),
            vec![
                element("nav-search", "link", "Search"),
                element("nav-help", "link", "Help"),
                element(
                    &format!("nav-s{section}"),
                    "link",
                    &format!("Section {section}"),
                ),
            ],
        ),
        1 => page(
            "/search".into(),
            vec![
                element("q", "textbox", "Search"),
                element("go", "button", "Go"),
                element("adv", "button", "Advanced"),
            ],
        ),
        2 => {
            let user = rng.gen_range(1..50);
            page(
                format!("/users/{user}"),
                vec![
                    element("h", "heading", &format!("User {user}")),
                    element("follow", "button", "Follow"),
                    element("tab-activity", "tab", "Activity"),
                    element("tab-groups", "tab", "Groups"),
                ],
            )
        }
        3 => {
            let mut items: Vec<InterfaceElement> = (0..rng.gen_range(1..6))
                .map(|i| element(&format!("item-{i}"), "link", &format!("Item {i}")))
                .collect();
            items.push(element("filter", "combobox", "Status"));
            items.push(element("new", "button", "New item"));
            page(format!("/s{section}/items"), items)
        }
        _ => {
            let id = rng.gen_range(1..500);
            let hash: String = (0..8)
                .map(|_| char::from_digit(rng.gen_range(0..16), 16).unwrap())
                .collect();
            let path = if rng.gen_bool(0.5) {
                format!("/s{section}/item/{id}")
            } else {
                format!("/s{section}/commit/{hash}")
            };
            page(
                path,
                vec![
                    element("edit", "button", "Edit"),
                    element("comment", "textbox", "Comment"),
                    element("back", "link", "Back"),
                ],
            )
        }
    }
}

pub fn random_trajectory(
    rng: &mut impl Rng,
    task_id: &str,
    env: &str,
    cfg: &GenConfig,
) -> Trajectory {
    let mut t = Trajectory::new(task_id, env);
    t.base_url = HOST.to_string();
    let n = rng.gen_range(1..=cfg.max_events.max(1));
    let mut current = random_page(rng, cfg);
    let mut index = 0u64;
    let mut time = 0u64;
    for _ in 0..n {
        index += rng.gen_range(1..3);
        time += rng.gen_range(0..2000);
        let mut e = RawEvent {
            index,
            timestamp: time,
            action_type: ActionType::Click,
            url: format!("{HOST}{}", current.path),
            selector: None,
            element_text: None,
            element_role: None,
            value: None,
            utterance: None,
            snapshot_ref: None,
        };
        if rng.gen_bool(0.1) {
            e.action_type = ActionType::Utterance;
            e.url.clear();
            e.utterance = Some(format!("thinking about step {index}"));
            t.events.push(e);
            continue;
        }
        let targets: Vec<&InterfaceElement> = current
            .elements
            .iter()
            .filter(|el| el.interactable)
            .collect();
        let target = targets.choose(rng).copied().cloned();
        let mut next = None;
        match (rng.gen_range(0..10), target) {
            (0, _) | (_, None) => {
                let p = random_page(rng, cfg);
                e.action_type = ActionType::Navigate;
                e.url = format!("{HOST}{}", p.path);
                next = Some(p);
            }
            (1, _) => e.action_type = ActionType::Scroll,
            (_, Some(el)) => {
                e.selector = Some(el.element_id.clone());
                e.element_role = Some(el.role.clone());
                if rng.gen_bool(0.9) {
                    e.element_text = Some(el.text.clone());
                }
                match el.role.as_str() {
                    "textbox" => {
                        e.action_type = if rng.gen_bool(0.8) {
                            ActionType::Type
                        } else {
                            ActionType::Key
                        };
                        let words = ["tablet", "usb hub", "login bug", "Enter", "q"];
                        e.value = Some(words.choose(rng).unwrap().to_string());
                    }
                    "combobox" => {
                        e.action_type = ActionType::Select;
                        e.value = Some(["open", "closed", "all"].choose(rng).unwrap().to_string());
                    }
                    "link" => next = Some(random_page(rng, cfg)),
                    _ => {}
                }
            }
        }
        if let Some(p) = next {
            current = p;
        }
        if rng.gen_bool(cfg.snapshot_probability) {
            let id = format!("snap-{index}");
            e.snapshot_ref = Some(id.clone());
            t.snapshots.insert(
                id.clone(),
                DomSnapshot {
                    snapshot_id: id,
                    url: format!("{HOST}{}", current.path),
                    capture_index: index,
                    elements: current.elements.clone(),
                },
            );
        }
        t.events.push(e);
    }
    t
}

/// `n` trajectories named `task_0..`, reproducible from `seed`.
pub fn random_trajectories(seed: u64, n: usize, env: &str, cfg: &GenConfig) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| random_trajectory(&mut rng, &format!("task_{i}"), env, cfg))
        .collect()
}

/// Random visit sequences over a small alphabet, for metric oracles.
pub fn random_visits(rng: &mut impl Rng, max_len: usize, alphabet: usize) -> Vec<String> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| format!("/p{}", rng.gen_range(0..alphabet)))
        .collect()
}

/// Index of every (task, step) and (task, snapshot) a map may cite.
pub fn provenance_index(ts: &[Trajectory]) -> BTreeMap<String, (usize, Vec<String>)> {
    ts.iter()
        .map(|t| {
            (
                t.task_id.clone(),
                (
                    t.action_events().count(),
                    t.snapshots.keys().cloned().collect(),
                ),
            )
        })
        .collect()
}

/// Map built from `n` synthetic trajectories over `sections` section
/// groups, with one hand-written definition when the map has contexts.
pub fn random_map(seed: u64, n: usize, sections: usize) -> EnvironmentMap {
    let cfg = GenConfig {
        sections,
        ..GenConfig::default()
    };
    let ts = random_trajectories(seed, n, "synthetic", &cfg);
    let (mut m, _) = Pipeline::new("synthetic", HOST)
        .build(&ts)
        .expect("synthetic trajectories build");
    if let Some(c) = m.contexts.first() {
        m.tacit_knowledge.definitions.push(Definition {
            id: "definition.landing_page".into(),
            term: "landing page".into(),
            meaning: format!("The page matching {}", c.pattern),
            related_context_ids: vec![c.context_id.clone()],
            related_action_ids: c
                .actions
                .iter()
                .take(1)
                .map(|a| a.action_id.clone())
                .collect(),
            origin: KnowledgeOrigin::Manual,
        });
    }
    m
}

const GROUP_ROLES: [&str; 3] = ["region", "navigation", "form"];
const TREE_ROLES: [&str; 6] = ["row", "link", "listitem", "generic", "button", "cell"];

/// Serialized accessibility tree of at least `min_chars` characters made of
/// 30-sibling same-role runs with texts up to 500 characters, some of them
/// containing quotes, escapes, and non-ASCII text.
pub fn adversarial_tree(rng: &mut impl Rng, min_chars: usize) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut total = 0;
    let mut group = 0;
    while total < min_chars {
        // Shallow group headers with alternating roles keep every group
        // reachable instead of nesting it under an earlier dropped sibling.
        let depth = rng.gen_range(0..2);
        let indent = "  ".repeat(depth);
        let header = GROUP_ROLES[group % GROUP_ROLES.len()];
        lines.push(format!("{indent}{header} \"Group {group}\" [g{group}]"));
        let role = TREE_ROLES.choose(rng).unwrap();
        for i in 0..30 {
            let len = rng.gen_range(0..=500);
            let text: String = (0..len)
                .map(|k| match rng.gen_range(0..40) {
                    0 => '"',
                    1 => '\\',
                    2 => 'é',
                    3 => '漢',
                    _ => char::from(b'a' + (k % 26) as u8),
                })
                .collect();
            let quoted = format!("{text:?}");
            lines.push(format!("{indent}  {role} {quoted} [g{group}-{i}]"));
            if rng.gen_bool(0.2) {
                lines.push(format!(
                    "{indent}    StaticText \"child of {i}\" [g{group}-{i}-c]"
                ));
            }
        }
        group += 1;
        total = lines.iter().map(|l| l.chars().count() + 1).sum();
    }
    lines.join("\n")
}

pub const FIXTURE_FILES: [&str; 3] = ["gitlab_mini.log", "task_135.log", "task_259.log"];
pub const FIXTURE_BASE_URL: &str = "http://localhost:8023";

/// The bundled fixture directory of the core crate.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// The three bundled GitLab trajectories, in file order.
pub fn fixture_trajectories() -> Vec<Trajectory> {
    FIXTURE_FILES
        .iter()
        .map(|f| {
            let path = fixture_dir().join("gitlab").join(f);
            let text = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            envmap::parse_trajectory(&text).expect("fixture parses")
        })
        .collect()
}

pub fn fixture_pipeline() -> Pipeline {
    Pipeline::new("gitlab", FIXTURE_BASE_URL)
}

/// Fixture trajectories plus `extra` synthetic ones (`syn_0..`) recorded in
/// the same environment.
pub fn trajectory_pool(seed: u64, extra: usize) -> Vec<Trajectory> {
    let mut pool = fixture_trajectories();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig {
        max_events: 10,
        ..GenConfig::default()
    };
    for i in 0..extra {
        pool.push(random_trajectory(
            &mut rng,
            &format!("syn_{i}"),
            "gitlab",
            &cfg,
        ));
    }
    pool
}
