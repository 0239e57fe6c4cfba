//! Acceptance run: every criterion at its stated tolerance and time budget.
//! Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::DateTime;
use envmap::annotator::{
    annotate_or_fallback, AnnotationRequest, AnnotationResponse, HeuristicAnnotator,
    TemplateRequest,
};
use envmap::map::{deserialize_map, render_map, serialize_map};
use envmap::nav_metrics::{compute_metrics, HarEntry, ResourceKind};
use envmap::trace::{
    filter_accessibility_tree, serialize_trajectory, ActionType, FilterLimits, RawEvent, Trajectory,
};
use envmap::viz::{build_graph, export_graph, ExportFormat, ExportOptions, NodeFamily};
use envmap::{Normalizer, Pipeline};
use envmap_testkit::laws::{
    a11y_failures, brute_force_backtracks, merge_law_failures, partition_failures,
    split_rebuild_failures,
};
use envmap_testkit::{
    adversarial_tree, fixture_dir, fixture_pipeline, fixture_trajectories, random_map,
    random_trajectories, random_visits, trajectory_pool, GenConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object()
        .map(|o| o.keys().cloned().collect())
        .unwrap_or_default()
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn schema_fidelity() -> Outcome {
    let (m, _) = fixture_pipeline()
        .build(&fixture_trajectories())
        .map_err(|e| e.to_string())?;
    let rendered = render_map(&m);
    let top: Value =
        serde_json::from_str(&rendered[Path::new("map.json")]).map_err(|e| e.to_string())?;
    let want_top = names(&[
        "id",
        "name",
        "description",
        "base_url",
        "page_contexts",
        "workflows",
        "tacit_knowledge",
        "statistics",
        "metadata",
    ]);
    ensure(keys(&top) == want_top, || {
        format!("top-level fields {:?}", keys(&top))
    })?;
    let want_summary = names(&[
        "context_id",
        "name",
        "description",
        "pattern",
        "context_mesh_path",
        "action_count",
        "contributing_recordings",
    ]);
    for c in top["page_contexts"].as_array().into_iter().flatten() {
        ensure(keys(c) == want_summary, || {
            format!("context summary fields {:?}", keys(c))
        })?;
    }
    let want_action = names(&[
        "action",
        "action_id",
        "type",
        "is_parameterized",
        "parameter_name",
        "possible_values",
        "instances",
    ]);
    let want_instance = names(&["action_id", "is_taken", "action_description", "provenance"]);
    let mut context_files = 0;
    for (path, text) in &rendered {
        if !path.starts_with("contexts") {
            continue;
        }
        context_files += 1;
        let c: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        ensure(
            keys(&c) == names(&["id", "pattern", "available_actions"]),
            || format!("{}: fields {:?}", path.display(), keys(&c)),
        )?;
        for a in c["available_actions"].as_array().into_iter().flatten() {
            ensure(keys(a) == want_action, || {
                format!("action fields {:?}", keys(a))
            })?;
            for i in a["instances"].as_array().into_iter().flatten() {
                ensure(keys(i) == want_instance, || {
                    format!("instance fields {:?}", keys(i))
                })?;
            }
        }
    }
    ensure(context_files == m.contexts.len(), || {
        "context file count".into()
    })?;

    let golden = fixture_dir().join("golden");
    for (path, text) in &rendered {
        let want = fs::read_to_string(golden.join(path))
            .map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(&want == text, || {
            format!("{} differs from golden", path.display())
        })?;
    }
    Ok(format!("{} files match golden", rendered.len()))
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn round_trip() -> Outcome {
    let mut sizes = Vec::new();
    for i in 0..10u64 {
        let m = random_map(100 + i, (i * 6) as usize, (i * 5 / 3) as usize + 1);
        sizes.push(m.contexts.len());
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        serialize_map(&m, a.path()).map_err(|e| e.to_string())?;
        let back = deserialize_map(a.path()).map_err(|e| e.to_string())?;
        ensure(back == m, || {
            format!("map {i}: deserialize(serialize(m)) != m")
        })?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        serialize_map(&back, b.path()).map_err(|e| e.to_string())?;
        ensure(dir_bytes(a.path()) == dir_bytes(b.path()), || {
            format!("map {i}: serialize(deserialize(d)) != d")
        })?;
    }
    ensure(sizes.iter().all(|&n| n <= 50), || {
        format!("sizes {sizes:?}")
    })?;
    Ok(format!("context counts {sizes:?}"))
}

fn merge_algebra() -> Outcome {
    let pool = trajectory_pool(7, 9);
    let p = fixture_pipeline();
    let empty = p.empty_map();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pick = |rng: &mut ChaCha8Rng| {
        let chosen: Vec<Trajectory> = pool.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        p.build(&chosen).map(|(m, _)| m).map_err(|e| e.to_string())
    };
    for case in 0..100 {
        let (a, b, c) = (pick(&mut rng)?, pick(&mut rng)?, pick(&mut rng)?);
        let failures = merge_law_failures(&empty, &a, &b, &c);
        ensure(failures.is_empty(), || format!("case {case}: {failures:?}"))?;
    }
    Ok("100 triples, 4 laws".into())
}

fn split_rebuild() -> Outcome {
    let failures = split_rebuild_failures(&fixture_pipeline(), &fixture_trajectories());
    ensure(failures.is_empty(), || format!("{failures:?}"))?;
    Ok("3 per-trajectory maps merged = single-shot build".into())
}

fn partition_provenance() -> Outcome {
    let ts = random_trajectories(2024, 50, "gitlab", &GenConfig::default());
    let failures = partition_failures(&fixture_pipeline(), &ts);
    ensure(failures.is_empty(), || format!("{failures:?}"))?;
    let events: usize = ts.iter().map(|t| t.action_events().count()).sum();
    Ok(format!("50 trajectories, {events} action events"))
}

fn normalization() -> Outcome {
    let n = Normalizer::default();
    let got = n.normalize("/users/123").map_err(|e| e.to_string())?;
    ensure(got == "/users/{id}", || format!("/users/123 -> {got}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alphabet: Vec<char> = "abcxyz0123456789-_.~ABF".chars().collect();
    for _ in 0..1000 {
        let segs = rng.gen_range(0..7);
        let mut path = String::new();
        for _ in 0..segs {
            path.push('/');
            match rng.gen_range(0..4) {
                0 => path.push_str(&rng.gen_range(0..100_000).to_string()),
                1 => path.push_str("{id}"),
                _ => {
                    for _ in 0..rng.gen_range(1..12) {
                        path.push(alphabet[rng.gen_range(0..alphabet.len())]);
                    }
                }
            }
        }
        if path.is_empty() {
            path.push('/');
        }
        if rng.gen_bool(0.2) {
            path.push_str("?q=1");
        }
        let once = n.normalize(&path).map_err(|e| format!("{path}: {e}"))?;
        let twice = n.normalize(&once).map_err(|e| format!("{once}: {e}"))?;
        ensure(once == twice, || format!("{path}: {once} then {twice}"))?;
    }
    Ok("1000 random paths idempotent".into())
}

fn accessibility_filter() -> Outcome {
    let limits = FilterLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for round in 0..10 {
        // The last tree is large enough that even the filtered form hits the cap.
        let overflow = round == 9;
        let tree = adversarial_tree(&mut rng, if overflow { 200_000 } else { 50_000 });
        let longest = tree.lines().map(|l| l.chars().count()).max().unwrap_or(0);
        ensure(tree.chars().count() >= 50_000 && longest > 400, || {
            "weak input".into()
        })?;
        let out = filter_accessibility_tree(&tree, limits);
        let failures = a11y_failures(&out, limits);
        ensure(failures.is_empty(), || {
            format!("round {round}: {failures:?}")
        })?;
        ensure(out.contains("elements continue)"), || {
            format!("round {round}: no sibling marker")
        })?;
        ensure(out.contains("...\""), || {
            format!("round {round}: no truncated text")
        })?;
        let capped = out.ends_with("\n[...](output truncated at 20000 characters)");
        ensure(capped == overflow, || {
            format!("round {round}: size marker {capped}")
        })?;
    }
    Ok("10 adversarial trees of 50,000+ characters, one capped".into())
}

fn backtracking_oracle() -> Outcome {
    let n = Normalizer::default();
    let start = DateTime::parse_from_rfc3339("2024-05-01T10:00:00Z").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..10_000 {
        let visits = random_visits(&mut rng, 20, 5);
        let entries: Vec<HarEntry> = visits
            .iter()
            .enumerate()
            .map(|(i, v)| HarEntry {
                started_at: start + chrono::Duration::seconds(i as i64),
                method: "GET".into(),
                url: format!("http://localhost:9000{v}"),
                resource_kind: ResourceKind::Document,
                status: 200,
            })
            .collect();
        let m = compute_metrics(&entries, &n);
        let want = brute_force_backtracks(&visits);
        let transitions = m.page_visits.len().saturating_sub(1).max(1);
        ensure(m.backtracks == want, || {
            format!("case {case} {visits:?}: {} vs {want}", m.backtracks)
        })?;
        ensure(
            m.backtracking_rate == want as f64 / transitions as f64,
            || format!("case {case}: rate {}", m.backtracking_rate),
        )?;
    }
    Ok("10,000 sequences agree exactly".into())
}

fn click_trajectory(task: &str, target: &str) -> Trajectory {
    let mut t = Trajectory::new(task, "gitlab");
    t.base_url = "http://localhost:8023".into();
    t.events.push(RawEvent {
        index: 0,
        timestamp: 0,
        action_type: ActionType::Click,
        url: "http://localhost:8023/-/user_settings".into(),
        selector: Some(format!("a-{}", target.to_lowercase())),
        element_text: Some(target.into()),
        element_role: Some("link".into()),
        value: None,
        utterance: None,
        snapshot_ref: None,
    });
    t
}

fn template_induction() -> Outcome {
    let req = AnnotationRequest::InduceTemplate(TemplateRequest {
        verb: ActionType::Click,
        element_role: Some("link".into()),
        instances: vec!["Click Settings".into(), "Click Profile".into()],
    });
    let AnnotationResponse::InduceTemplate(t) = annotate_or_fallback(&HeuristicAnnotator, &req)
    else {
        return Err("wrong response kind".into());
    };
    ensure(t.template == "Click {link_text}", || {
        format!("template {:?}", t.template)
    })?;
    let values: BTreeSet<&str> = t.bindings.iter().map(String::as_str).collect();
    ensure(values == BTreeSet::from(["Settings", "Profile"]), || {
        format!("V = {values:?}")
    })?;

    let ts = [
        click_trajectory("task_1", "Settings"),
        click_trajectory("task_2", "Profile"),
    ];
    let (m, _) = Pipeline::new("gitlab", "http://localhost:8023")
        .build(&ts)
        .map_err(|e| e.to_string())?;
    let actions: Vec<_> = m.contexts.iter().flat_map(|c| &c.actions).collect();
    ensure(actions.len() == 1, || format!("{} actions", actions.len()))?;
    let a = actions[0];
    ensure(a.template == "Click {link_text}", || {
        format!("pipeline template {:?}", a.template)
    })?;
    ensure(a.possible_values == ["Profile", "Settings"], || {
        format!("pipeline V {:?}", a.possible_values)
    })?;
    Ok("Click {link_text}, V = {Settings, Profile}".into())
}

fn build_with_binary(traces: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_envmap"))
        .args(["build", "--traces"])
        .arg(traces)
        .arg("--out")
        .arg(out)
        .args([
            "--env-name",
            "synthetic",
            "--base-url",
            "http://localhost:9000",
            "--annotator",
            "heuristic",
        ])
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        String::from_utf8_lossy(&status.stderr).into_owned()
    })
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let traces = tmp.path().join("traces");
    fs::create_dir(&traces).map_err(|e| e.to_string())?;
    for t in random_trajectories(99, 50, "synthetic", &GenConfig::default()) {
        fs::write(
            traces.join(format!("{}.log", t.task_id)),
            serialize_trajectory(&t),
        )
        .map_err(|e| e.to_string())?;
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    build_with_binary(&traces, &a)?;
    build_with_binary(&traces, &b)?;
    let (da, db) = (dir_bytes(&a), dir_bytes(&b));
    ensure(da == db, || "map directories differ".into())?;
    Ok(format!("{} identical files", da.len()))
}

fn graph_export() -> Outcome {
    let (m, _) = fixture_pipeline()
        .build(&fixture_trajectories())
        .map_err(|e| e.to_string())?;
    let doc = build_graph(&m, ExportOptions::default()).map_err(|e| e.to_string())?;
    let actions: Vec<_> = m.contexts.iter().flat_map(|c| &c.actions).collect();
    let expected = 1 + m.contexts.len() + actions.len();
    ensure(doc.nodes.len() == expected, || {
        format!("{} nodes, expected {expected}", doc.nodes.len())
    })?;
    let ids: HashSet<&str> = doc.nodes.iter().map(|n| n.node_id.as_str()).collect();
    for e in &doc.edges {
        ensure(
            ids.contains(e.from.as_str()) && ids.contains(e.to.as_str()),
            || format!("dangling {e:?}"),
        )?;
    }
    let family: HashMap<&str, NodeFamily> = doc
        .nodes
        .iter()
        .map(|n| (n.node_id.as_str(), n.family))
        .collect();
    for a in &actions {
        let want = if a.has_taken() {
            NodeFamily::TakenAction
        } else {
            NodeFamily::PotentialAction
        };
        ensure(family.get(a.action_id.as_str()) == Some(&want), || {
            format!("{} family", a.action_id)
        })?;
    }
    let dot =
        export_graph(&m, ExportFormat::Dot, ExportOptions::default()).map_err(|e| e.to_string())?;
    graphviz_rust::parse(&dot).map_err(|e| format!("DOT does not parse: {e}"))?;
    Ok(format!(
        "{} nodes, {} edges, DOT parses",
        doc.nodes.len(),
        doc.edges.len()
    ))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion {
            name: "schema fidelity",
            budget: secs(1),
            run: schema_fidelity,
        },
        Criterion {
            name: "round trip",
            budget: secs(5),
            run: round_trip,
        },
        Criterion {
            name: "merge algebra",
            budget: secs(30),
            run: merge_algebra,
        },
        Criterion {
            name: "split/rebuild equivalence",
            budget: secs(5),
            run: split_rebuild,
        },
        Criterion {
            name: "partition and provenance",
            budget: secs(10),
            run: partition_provenance,
        },
        Criterion {
            name: "normalization",
            budget: secs(2),
            run: normalization,
        },
        Criterion {
            name: "accessibility filter",
            budget: secs(2),
            run: accessibility_filter,
        },
        Criterion {
            name: "backtracking oracle",
            budget: secs(10),
            run: backtracking_oracle,
        },
        Criterion {
            name: "template induction",
            budget: secs(1),
            run: template_induction,
        },
        Criterion {
            name: "end-to-end determinism",
            budget: secs(10),
            run: end_to_end_determinism,
        },
        Criterion {
            name: "graph export sanity",
            budget: secs(1),
            run: graph_export,
        },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        let elapsed = start.elapsed();
        let verdict = match result {
            Ok(detail) if elapsed <= c.budget => format!("PASS  {detail}"),
            Ok(detail) => format!("FAIL  over budget {:?} ({detail})", c.budget),
            Err(why) => format!("FAIL  {why}"),
        };
        if verdict.starts_with("FAIL") {
            failed += 1;
        }
        println!(
            "[{:>2}] {:<28} {:>8.3}s  {verdict}",
            i + 1,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
