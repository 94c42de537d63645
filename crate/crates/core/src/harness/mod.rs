//! Benchmark instances cut from recorded sessions, the inference driver for
//! Follower agents, metrics, data splits and corpus statistics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::checker::{CheckError, TaskTree};
use crate::sim::{ActionRecord, Divergence, SessionFormatError};
use crate::tdl::TaskLibrary;
use crate::world::{diff_states, PropertyDelta, WorldState};

pub mod inference;
pub mod metrics;
pub mod segment;
pub mod splits;
pub mod stats;

pub use inference::{run_inference, EvalOutcome, FollowerPolicy, InferenceHalt, InferenceLimits, ScriptedFollower};
pub use metrics::{macro_average, score, trajectory_weight, Scores};
pub use segment::{extract_tfd, segment_edh, EdhOptions};
pub use splits::{default_assignment, make_splits, FloorplanAssignment, SplitError, SplitProportions, SplitSpec};
pub use stats::{session_stats, MeanSd, StatsRow};

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Edh,
    Tfd,
}

/// One EDH or TfD instance. For TfD, `history` holds the whole dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub version: u32,
    pub kind: InstanceKind,
    pub instance_id: String,
    pub session_id: String,
    pub task_name: String,
    pub task_params: Vec<String>,
    pub start_state: WorldState,
    pub history: Vec<ActionRecord>,
    pub reference_actions: Vec<crate::sim::Action>,
    pub expected_deltas: BTreeSet<PropertyDelta>,
    /// Whether deltas are restricted to task-relevant (object, property) pairs.
    pub relevance_filtered: bool,
}

impl Instance {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Instance, SessionFormatError> {
        let i: Instance = serde_json::from_str(text).map_err(|e| SessionFormatError::Format(e.to_string()))?;
        if i.version != INSTANCE_FORMAT_VERSION {
            return Err(SessionFormatError::Version(i.version));
        }
        Ok(i)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Replay(#[from] Divergence),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("session has no property changes")]
    NoDeltas,
}

/// State changes between two snapshots that bear on the task.
pub fn relevant_deltas(tree: &TaskTree, before: &WorldState, after: &WorldState) -> BTreeSet<PropertyDelta> {
    let mut pairs = tree.relevant_pairs(before);
    pairs.extend(tree.relevant_pairs(after));
    diff_states(before, after)
        .into_iter()
        .filter(|d| pairs.contains(&(d.object_id.clone(), d.property)))
        .collect()
}

/// Deltas as scored for `instance`: filtered or plain, per its flag.
pub fn instance_deltas(
    instance: &Instance,
    lib: &TaskLibrary,
    before: &WorldState,
    after: &WorldState,
) -> Result<BTreeSet<PropertyDelta>, CheckError> {
    if !instance.relevance_filtered {
        return Ok(diff_states(before, after));
    }
    let ground = lib.ground(&instance.task_name, &instance.task_params)?;
    let tree = TaskTree::build(&ground, lib)?;
    Ok(relevant_deltas(&tree, before, after))
}
