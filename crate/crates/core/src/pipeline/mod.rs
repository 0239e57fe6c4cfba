//! Trajectories to environment maps.
//!
//! Phases, in order: step construction, action extraction (taken and
//! potential), generalization into templates, context and knowledge
//! extraction, and assembly. The first two run per trajectory and can be
//! parallelized by the caller through [`Pipeline::trajectory_part`]; the rest
//! is a fold over all parts in [`Pipeline::finish`].

mod knowledge;
mod merge;
mod normalize;
mod phases;

use std::collections::HashMap;
use std::env;
use std::sync::Arc;

use thiserror::Error;

use crate::annotator::{Annotator, HeuristicAnnotator};
use crate::map::{EnvironmentMap, MapViolation, Metadata, RawAction, Workflow};
use crate::trace::Trajectory;

pub use knowledge::resolve_knowledge;
pub use merge::{assemble_map, consolidate, merge_maps, merge_maps_with};
pub use normalize::{
    display_path, url_path, NormalizationRule, NormalizeError, Normalizer, RulesError,
};
pub use phases::PatternAction;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("recordings {0:?} and {1:?} map to the same identifier")]
    DuplicateTask(String, String),
    #[error("assembled map is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInput(Vec<MapViolation>),
    #[error("cannot merge maps of different environments: {left} vs {right}")]
    EnvironmentMismatch { left: String, right: String },
}

/// Non-fatal findings collected while building.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub warnings: Vec<String>,
}

impl BuildReport {
    pub(crate) fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn extend(&mut self, other: BuildReport) {
        self.warnings.extend(other.warnings);
    }
}

/// Output of the per-trajectory phases.
#[derive(Debug, Clone)]
pub struct TrajectoryPart {
    pub task_id: String,
    pub workflow: Option<Workflow>,
    pub raw_actions: Vec<RawAction>,
    pub report: BuildReport,
}

/// `created_at` stamp: `SOURCE_DATE_EPOCH` when set, else the Unix epoch,
/// so identical inputs give identical maps.
pub fn build_timestamp() -> String {
    env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| Metadata::DEFAULT_CREATED_AT.to_string())
}

#[derive(Clone)]
pub struct Pipeline {
    pub env: String,
    pub base_url: String,
    pub normalizer: Normalizer,
    pub annotator: Arc<dyn Annotator>,
}

impl Pipeline {
    pub fn new(env: impl Into<String>, base_url: impl Into<String>) -> Self {
        Self {
            env: env.into(),
            base_url: base_url.into(),
            normalizer: Normalizer::default(),
            annotator: Arc::new(HeuristicAnnotator),
        }
    }

    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Self {
        self.normalizer = normalizer;
        self
    }

    pub fn with_annotator(mut self, annotator: Arc<dyn Annotator>) -> Self {
        self.annotator = annotator;
        self
    }

    pub fn metadata(&self) -> Metadata {
        Metadata::new(build_timestamp(), self.annotator.kind())
    }

    pub fn empty_map(&self) -> EnvironmentMap {
        EnvironmentMap::empty(&self.env, &self.base_url, self.metadata())
    }

    /// Step construction and action extraction for one trajectory.
    pub fn trajectory_part(&self, t: &Trajectory) -> Result<TrajectoryPart, PipelineError> {
        let mut report = BuildReport::default();
        if !t.environment.is_empty() && t.environment != self.env {
            report.warn(format!(
                "{}: recorded in environment {:?}, building {:?}",
                t.task_id, t.environment, self.env
            ));
        }
        if t.action_events().next().is_none() {
            report.warn(format!(
                "{}: no action events; contributes no workflow",
                t.task_id
            ));
            return Ok(TrajectoryPart {
                task_id: t.task_id.clone(),
                workflow: None,
                raw_actions: Vec::new(),
                report,
            });
        }
        let workflow = self.build_steps(t)?;
        let raw_actions = self.extract_actions(&workflow, t)?;
        Ok(TrajectoryPart {
            task_id: t.task_id.clone(),
            workflow: Some(workflow),
            raw_actions,
            report,
        })
    }

    /// Generalization, contexts, knowledge, and assembly over all parts.
    /// `trajectories` supply page excerpts for context descriptions.
    pub fn finish(
        &self,
        parts: Vec<TrajectoryPart>,
        trajectories: &[Trajectory],
    ) -> Result<(EnvironmentMap, BuildReport), PipelineError> {
        let mut report = BuildReport::default();
        let mut seen: HashMap<String, String> = HashMap::new();
        for p in &parts {
            let key = crate::ids::sanitize(&p.task_id);
            if let Some(prev) = seen.insert(key, p.task_id.clone()) {
                return Err(PipelineError::DuplicateTask(prev, p.task_id.clone()));
            }
        }
        let mut workflows = Vec::new();
        let mut raw = Vec::new();
        for p in parts {
            report.extend(p.report);
            workflows.extend(p.workflow);
            raw.extend(p.raw_actions);
        }
        let generalized = self.generalize_actions(raw)?;
        let contexts = self.build_contexts(generalized, trajectories)?;
        let (knowledge, warnings) = self.extract_knowledge(&workflows, &contexts);
        report.extend(warnings);
        let map = assemble_map(
            &self.env,
            &self.base_url,
            workflows,
            contexts,
            knowledge,
            self.metadata(),
            self.annotator.as_ref(),
        )?;
        Ok((map, report))
    }

    /// All phases, sequentially.
    pub fn build(
        &self,
        trajectories: &[Trajectory],
    ) -> Result<(EnvironmentMap, BuildReport), PipelineError> {
        let parts = trajectories
            .iter()
            .map(|t| self.trajectory_part(t))
            .collect::<Result<Vec<_>, _>>()?;
        self.finish(parts, trajectories)
    }
}
