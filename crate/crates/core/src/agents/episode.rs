//! Two-agent (TATC) episodes: the Follower acts, the Commander answers its
//! utterances, and everything is recorded as a [`Session`].

use serde::{Deserialize, Serialize};

use super::{CommanderAgent, CommanderEvent, FollowerAgent};
use crate::checker::{CheckError, TaskTree};
use crate::sim::{observe, search_object, Action, ActionRecord, ActionResult, Clock, Role, Scenario, Session, Simulator, SESSION_FORMAT_VERSION};
use crate::tdl::TaskLibrary;
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLimits {
    /// Follower actions, utterances included.
    pub max_steps: usize,
    /// Failed Follower environment actions.
    pub max_fails: usize,
    /// Commander actions answering one Follower utterance.
    pub max_commander_ops: usize,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        EpisodeLimits {
            max_steps: 1000,
            max_fails: 30,
            max_commander_ops: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    CommanderStop,
    FollowerStop,
    MaxSteps,
    MaxFails,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub session: Session,
    pub success: bool,
    pub halt: HaltReason,
}

struct Recorder<'a> {
    sim: &'a Simulator,
    world: WorldState,
    clock: Clock,
    actions: Vec<ActionRecord>,
}

impl Recorder<'_> {
    fn record(&mut self, agent: Role, action: Action, observation: Option<serde_json::Value>) -> ActionResult {
        let (next, result) = self.sim.step(&self.world, &action, agent);
        self.world = next;
        let time_ms = self.clock.stamp(&action);
        self.actions.push(ActionRecord {
            time_ms,
            agent,
            success: result.success,
            error: result.error.clone(),
            action,
            observation,
        });
        result
    }
}

pub fn run_tatc_episode(
    scenario: &Scenario,
    lib: &TaskLibrary,
    commander: &mut dyn CommanderAgent,
    follower: &mut dyn FollowerAgent,
    limits: &EpisodeLimits,
    sim: &Simulator,
) -> Result<EpisodeOutcome, CheckError> {
    let ground = lib.ground(&scenario.task_name, &scenario.task_params)?;
    let tree = TaskTree::build(&ground, lib)?;
    let mut rec = Recorder {
        sim,
        world: scenario.initial_state.clone(),
        clock: Clock::default(),
        actions: Vec::new(),
    };
    let mut heard: Option<String> = None;
    let mut last_result: Option<ActionResult> = None;
    let mut steps = 0;
    let mut fails = 0;
    let halt = 'episode: loop {
        if steps >= limits.max_steps {
            break HaltReason::MaxSteps;
        }
        let obs = observe(&rec.world, Role::Follower, last_result.take(), &sim.config);
        let action = follower.act(&obs, heard.take().as_deref());
        steps += 1;
        let result = rec.record(Role::Follower, action.clone(), None);
        match &action {
            Action::Stop => break HaltReason::FollowerStop,
            a if a.is_environment() && !result.success => {
                fails += 1;
                if fails >= limits.max_fails {
                    break HaltReason::MaxFails;
                }
            }
            _ => {}
        }
        last_result = Some(result);
        let Action::Utterance { text } = action else { continue };
        let mut event = CommanderEvent::FollowerUtterance(text);
        for _ in 0..limits.max_commander_ops {
            let act = commander.act(&rec.world, &event);
            match act {
                Action::ProgressCheck => {
                    rec.record(Role::Commander, act, None);
                    event = CommanderEvent::ProgressReport(tree.report(&rec.world));
                }
                Action::SearchObject { ref query } => {
                    let hits = search_object(&rec.world, query);
                    let seen = serde_json::to_value(&hits).ok();
                    rec.record(Role::Commander, act, seen);
                    event = CommanderEvent::SearchResult(hits);
                }
                Action::Utterance { ref text } => {
                    heard = Some(text.clone());
                    rec.record(Role::Commander, act, None);
                    break;
                }
                Action::Stop => break 'episode HaltReason::CommanderStop,
                other => {
                    rec.record(Role::Commander, other, None);
                }
            }
        }
    };
    let success = tree.evaluate(&rec.world).success;
    let session = Session {
        version: SESSION_FORMAT_VERSION,
        session_id: format!("{}-{}-{}", scenario.floorplan_id, slug(&scenario.task_name), scenario.seed),
        floorplan_id: scenario.floorplan_id.clone(),
        task_name: scenario.task_name.clone(),
        task_params: scenario.task_params.clone(),
        seed: scenario.seed,
        sim_config: sim.config.clone(),
        initial_state: scenario.initial_state.clone(),
        actions: rec.actions,
        final_state: rec.world,
    };
    Ok(EpisodeOutcome { session, success, halt })
}

fn slug(name: &str) -> String {
    name.to_lowercase().replace(' ', "_")
}
