//! Routable task units shared by the runtime, backends, and benchmark.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::AgentRole;
use crate::router::ModelTier;

/// Benchmark and generation domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Software,
    Data,
    Science,
    Security,
}

impl Domain {
    pub const ALL: [Domain; 4] = [Domain::Software, Domain::Data, Domain::Science, Domain::Security];
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Domain::Software => "software",
            Domain::Data => "data",
            Domain::Science => "science",
            Domain::Security => "security",
        };
        write!(f, "{name}")
    }
}

fn default_latent() -> f64 {
    0.5
}

/// One routable unit of work.
///
/// `latent_difficulty` is simulation ground truth: only backends and
/// explicitly-labeled oracles may read it. Feature extraction and routing
/// never see it, which a source-level test enforces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStep {
    pub id: String,
    pub text: String,
    pub role: AgentRole,
    /// Tokens of context the agent already carries for this step, before
    /// any shared workflow history.
    pub context_tokens: usize,
    pub domain: Domain,
    #[serde(default = "default_latent")]
    latent_difficulty: f64,
}

impl TaskStep {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        role: AgentRole,
        context_tokens: usize,
        domain: Domain,
        latent_difficulty: f64,
    ) -> Self {
        assert!(
            (0.0..=1.0).contains(&latent_difficulty),
            "latent difficulty {latent_difficulty} outside [0, 1]"
        );
        TaskStep {
            id: id.into(),
            text: text.into(),
            role,
            context_tokens,
            domain,
            latent_difficulty,
        }
    }

    /// Simulation-side ground truth. Not a routing feature.
    pub fn latent_difficulty(&self) -> f64 {
        self.latent_difficulty
    }

    /// Perfect-information routing used by oracle baselines and tests:
    /// Strong exactly when the hidden difficulty is above 0.5.
    pub fn oracle_tier(&self) -> ModelTier {
        if self.latent_difficulty > 0.5 {
            ModelTier::Strong
        } else {
            ModelTier::Weak
        }
    }
}

/// Writes one task per line as JSON Lines.
pub fn save_tasks_jsonl(path: impl AsRef<std::path::Path>, tasks: &[TaskStep]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for task in tasks {
        let line = serde_json::to_string(task)
            .map_err(|err| Error::Format(format!("task serialize: {err}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|err| Error::io(path.display().to_string(), err))
}

/// Reads a JSON Lines task file; blank lines are skipped and parse errors
/// name the 1-based line.
pub fn load_tasks_jsonl(path: impl AsRef<std::path::Path>) -> Result<Vec<TaskStep>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|err| Error::io(path.display().to_string(), err))?;
    let mut tasks = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let task: TaskStep = serde_json::from_str(line).map_err(|err| {
            Error::Format(format!("{} line {}: {err}", path.display(), idx + 1))
        })?;
        tasks.push(task);
    }
    Ok(tasks)
}
