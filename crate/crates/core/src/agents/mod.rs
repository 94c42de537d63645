//! Rule-based Commander and Follower agents and the two-agent episode driver.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::checker::ProgressReport;
use crate::sim::{Action, Observation, SearchHit};
use crate::world::WorldState;

pub mod commander;
pub mod episode;
pub mod planner;
pub mod tokens;

pub use commander::{commander_step, ActiveKey, CommanderConfig, PolicyState, STEP_COMPLETED};
pub use episode::{run_tatc_episode, EpisodeLimits, EpisodeOutcome, HaltReason};
pub use planner::{is_goal, plan_path, plan_path_from, simulate_motions, PlanError};
pub use tokens::{InstructionToken, TokenError};

pub const HELP_UTTERANCE: &str = "What should I do next?";

/// What the Commander is reacting to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum CommanderEvent {
    FollowerUtterance(String),
    ProgressReport(ProgressReport),
    SearchResult(Vec<SearchHit>),
}

pub trait FollowerAgent {
    /// Next action given the current egocentric view and any new Commander
    /// utterance.
    fn act(&mut self, obs: &Observation, heard: Option<&str>) -> Action;
}

pub trait CommanderAgent {
    /// Next Commander action. The Commander sees the full world snapshot.
    fn act(&mut self, world: &WorldState, event: &CommanderEvent) -> Action;
}

/// Pop the next queued token as an action, or ask for help when none are left.
pub fn follower_step(queue: &mut VecDeque<InstructionToken>, _obs: &Observation) -> Action {
    match queue.pop_front() {
        Some(t) => t.to_action(),
        None => Action::Utterance {
            text: HELP_UTTERANCE.to_string(),
        },
    }
}

/// Executes instruction tokens in order and asks for more when it runs out
/// or an action fails.
#[derive(Debug, Clone, Default)]
pub struct RuleFollower {
    queue: VecDeque<InstructionToken>,
}

impl RuleFollower {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

impl FollowerAgent for RuleFollower {
    fn act(&mut self, obs: &Observation, heard: Option<&str>) -> Action {
        if let Some(text) = heard {
            self.queue = tokens::parse(text).unwrap_or_default().into();
        } else if obs.last_result.as_ref().is_some_and(|r| !r.success) {
            self.queue.clear();
        }
        follower_step(&mut self.queue, obs)
    }
}

/// Progress Check, then a search for the newly targeted object, then the
/// instruction batch from [`commander_step`].
#[derive(Debug, Clone, Default)]
pub struct RuleCommander {
    pub config: CommanderConfig,
    pub state: PolicyState,
    pending: Option<String>,
}

impl RuleCommander {
    pub fn new(config: CommanderConfig) -> Self {
        RuleCommander {
            config,
            state: PolicyState::default(),
            pending: None,
        }
    }
}

impl CommanderAgent for RuleCommander {
    fn act(&mut self, world: &WorldState, event: &CommanderEvent) -> Action {
        match event {
            CommanderEvent::FollowerUtterance(_) => Action::ProgressCheck,
            CommanderEvent::ProgressReport(report) => {
                let (batch, next) = commander_step(report, &self.state, world, &self.config);
                let new_key = next.active.is_some() && next.active != self.state.active;
                let query = next.active.as_ref().map(|k| k.object_id.clone());
                self.state = next;
                if batch.is_empty() {
                    return Action::Stop;
                }
                let text = tokens::render(&batch);
                match query {
                    Some(query) if new_key => {
                        self.pending = Some(text);
                        Action::SearchObject { query }
                    }
                    _ => Action::Utterance { text },
                }
            }
            CommanderEvent::SearchResult(_) => match self.pending.take() {
                Some(text) => Action::Utterance { text },
                None => Action::Stop,
            },
        }
    }
}
