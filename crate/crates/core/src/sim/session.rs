//! Recorded episodes: initial state, timestamped actions and final state.

use serde::{Deserialize, Serialize};

use super::{Action, ActionResult, Role, SimConfig, Simulator};
use crate::world::{Cell, WorldState};

pub const SESSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub time_ms: u64,
    pub agent: Role,
    pub action: Action,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// What a Commander query returned (search hits), kept for histories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub version: u32,
    pub session_id: String,
    pub floorplan_id: String,
    pub task_name: String,
    pub task_params: Vec<String>,
    pub seed: u64,
    pub sim_config: SimConfig,
    pub initial_state: WorldState,
    pub actions: Vec<ActionRecord>,
    pub final_state: WorldState,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionFormatError {
    #[error("malformed session: {0}")]
    Format(String),
    #[error("unsupported session version {0}")]
    Version(u32),
}

impl Session {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session serializes")
    }

    pub fn from_json(text: &str) -> Result<Session, SessionFormatError> {
        let s: Session = serde_json::from_str(text).map_err(|e| SessionFormatError::Format(e.to_string()))?;
        if s.version != SESSION_FORMAT_VERSION {
            return Err(SessionFormatError::Version(s.version));
        }
        Ok(s)
    }

    pub fn utterance_count(&self) -> usize {
        self.actions.iter().filter(|a| a.action.is_dialogue()).count()
    }

    pub fn follower_env_actions(&self) -> impl Iterator<Item = &ActionRecord> {
        self.actions
            .iter()
            .filter(|a| a.agent == Role::Follower && a.action.is_environment())
    }
}

/// Virtual time: each action advances the clock by a fixed duration per kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Clock {
    pub now_ms: u64,
}

impl Clock {
    pub fn duration_ms(action: &Action) -> u64 {
        match action {
            Action::Utterance { text } => 1500 + 40 * text.chars().count() as u64,
            Action::Motion { .. } | Action::Camera { .. } => 400,
            Action::Interact { .. } => 900,
            Action::ProgressCheck => 1200,
            Action::SearchObject { .. } => 1000,
            Action::Stop => 0,
        }
    }

    /// Timestamp for `action`, then advance past it.
    pub fn stamp(&mut self, action: &Action) -> u64 {
        let t = self.now_ms;
        self.now_ms += Clock::duration_ms(action);
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("replay diverges at action {index}: {reason}")]
pub struct Divergence {
    /// Index of the first mismatching action; `actions.len()` for a final-state mismatch.
    pub index: usize,
    pub reason: String,
}

/// Re-execute every action from the initial state and compare outcomes.
pub fn replay(session: &Session) -> Result<(WorldState, Vec<ActionResult>), Divergence> {
    let sim = Simulator::new(session.sim_config.clone());
    let mut world = session.initial_state.clone();
    let mut results = Vec::with_capacity(session.actions.len());
    let mut last_time = 0;
    for (index, rec) in session.actions.iter().enumerate() {
        if rec.time_ms < last_time {
            return Err(Divergence {
                index,
                reason: format!("time_ms {} goes backwards", rec.time_ms),
            });
        }
        last_time = rec.time_ms;
        let (next, result) = sim.step(&world, &rec.action, rec.agent);
        if result.success != rec.success || (!result.success && result.error != rec.error) {
            return Err(Divergence {
                index,
                reason: format!(
                    "recorded success={} error={:?}, replayed success={} error={:?}",
                    rec.success, rec.error, result.success, result.error
                ),
            });
        }
        world = next;
        results.push(result);
    }
    if world.state_hash() != session.final_state.state_hash() {
        return Err(Divergence {
            index: session.actions.len(),
            reason: "final state hash differs".into(),
        });
    }
    Ok((world, results))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub object_id: String,
    pub object_type: String,
    /// Outermost fixture holding the object, or `follower hand`.
    pub location: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Cell>,
}

/// Commander lookup by exact object id or case-insensitive type substring.
pub fn search_object(world: &WorldState, query: &str) -> Vec<SearchHit> {
    let hit = |id: &str| {
        let root = world.root_of(id);
        SearchHit {
            object_id: id.to_string(),
            object_type: world.object_type(id).unwrap_or("").to_string(),
            location: if world.in_hand(id) {
                "follower hand".to_string()
            } else {
                root.to_string()
            },
            parent: world.parent_of(id).map(String::from),
            cell: world.cell_of(id),
        }
    };
    if world.object(query).is_some() {
        return vec![hit(query)];
    }
    let q = query.to_lowercase();
    world
        .objects
        .values()
        .filter(|o| !q.is_empty() && o.object_type().to_lowercase().contains(&q))
        .map(|o| hit(&o.object_id))
        .collect()
}
