//! Drives a Follower policy from an instance's start state under the step
//! and failure limits.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{instance_deltas, Instance};
use crate::checker::CheckError;
use crate::sim::{observe, Action, ActionResult, Observation, Role, Simulator};
use crate::tdl::TaskLibrary;
use crate::world::PropertyDelta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceLimits {
    pub max_steps: usize,
    pub max_fails: usize,
}

impl Default for InferenceLimits {
    fn default() -> Self {
        InferenceLimits {
            max_steps: 1000,
            max_fails: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceHalt {
    StopPredicted,
    StepLimit,
    FailLimit,
    /// The agent broke the protocol; scored as a failure.
    AgentError(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub instance_id: String,
    pub predicted_actions: Vec<Action>,
    pub achieved_deltas: BTreeSet<PropertyDelta>,
    pub failed_actions: usize,
    pub halt: InferenceHalt,
}

/// A Follower under evaluation, in process or behind the wire protocol.
pub trait FollowerPolicy {
    fn start(&mut self, instance: &Instance) -> Result<(), String>;
    fn act(&mut self, obs: &Observation) -> Result<Action, String>;
    fn end(&mut self, _outcome: &EvalOutcome) {}
}

/// Replays a fixed action list, then stops.
#[derive(Debug, Clone, Default)]
pub struct ScriptedFollower {
    script: Vec<Action>,
    next: usize,
    from_reference: bool,
}

impl ScriptedFollower {
    /// Replays each instance's own reference actions.
    pub fn oracle() -> Self {
        ScriptedFollower {
            from_reference: true,
            ..Default::default()
        }
    }

    pub fn new(script: Vec<Action>) -> Self {
        ScriptedFollower {
            script,
            next: 0,
            from_reference: false,
        }
    }
}

impl FollowerPolicy for ScriptedFollower {
    fn start(&mut self, instance: &Instance) -> Result<(), String> {
        if self.from_reference {
            self.script = instance.reference_actions.clone();
        }
        self.next = 0;
        Ok(())
    }

    fn act(&mut self, _obs: &Observation) -> Result<Action, String> {
        let a = self.script.get(self.next).cloned().unwrap_or(Action::Stop);
        self.next += 1;
        Ok(a)
    }
}

pub fn run_inference(
    agent: &mut dyn FollowerPolicy,
    instance: &Instance,
    lib: &TaskLibrary,
    sim: &Simulator,
    limits: &InferenceLimits,
) -> Result<EvalOutcome, CheckError> {
    let start = &instance.start_state;
    let mut world = start.clone();
    let mut predicted = Vec::new();
    let mut fails = 0;
    let mut last: Option<ActionResult> = None;
    let halt = match agent.start(instance) {
        Err(e) => InferenceHalt::AgentError(e),
        Ok(()) => loop {
            if predicted.len() >= limits.max_steps {
                break InferenceHalt::StepLimit;
            }
            let obs = observe(&world, Role::Follower, last.take(), &sim.config);
            let action = match agent.act(&obs) {
                Ok(a) => a,
                Err(e) => break InferenceHalt::AgentError(e),
            };
            predicted.push(action.clone());
            if action == Action::Stop {
                break InferenceHalt::StopPredicted;
            }
            let (next, result) = sim.step(&world, &action, Role::Follower);
            world = next;
            if !result.success {
                fails += 1;
                if fails >= limits.max_fails {
                    break InferenceHalt::FailLimit;
                }
            }
            last = Some(result);
        },
    };
    let achieved = instance_deltas(instance, lib, start, &world)?;
    let outcome = EvalOutcome {
        instance_id: instance.instance_id.clone(),
        predicted_actions: predicted,
        achieved_deltas: achieved,
        failed_actions: fails,
        halt,
    };
    agent.end(&outcome);
    Ok(outcome)
}
