#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use envmap::{parse_trajectory, EnvironmentMap, Pipeline, Trajectory};

pub const BASE_URL: &str = "http://localhost:8023";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn manifest() -> serde_json::Value {
    let text = fs::read_to_string(fixtures().join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub const FIXTURE_FILES: [&str; 3] = ["gitlab_mini.log", "task_135.log", "task_259.log"];

pub fn load(name: &str) -> Trajectory {
    let text = fs::read_to_string(fixtures().join("gitlab").join(name)).unwrap();
    parse_trajectory(&text).unwrap()
}

pub fn trajectories() -> Vec<Trajectory> {
    FIXTURE_FILES.iter().map(|f| load(f)).collect()
}

pub fn pipeline() -> Pipeline {
    Pipeline::new("gitlab", BASE_URL)
}

pub fn build(ts: &[Trajectory]) -> EnvironmentMap {
    pipeline().build(ts).unwrap().0
}

pub fn fixture_map() -> EnvironmentMap {
    build(&trajectories())
}
