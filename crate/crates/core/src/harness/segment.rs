//! Cutting sessions into EDH instances and whole-dialogue TfD instances.

use serde::{Deserialize, Serialize};

use super::{relevant_deltas, HarnessError, Instance, InstanceKind, INSTANCE_FORMAT_VERSION};
use crate::checker::TaskTree;
use crate::sim::{replay, Action, Role, Session, Simulator};
use crate::tdl::TaskLibrary;
use crate::world::{diff_states, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdhOptions {
    /// Drop Commander Progress Check and SearchObject records from histories.
    pub drop_commander_queries: bool,
    /// Drop Commander camera motions from histories.
    pub drop_camera: bool,
}

impl Default for EdhOptions {
    fn default() -> Self {
        EdhOptions {
            drop_commander_queries: false,
            drop_camera: true,
        }
    }
}

fn is_reference(rec: &crate::sim::ActionRecord) -> bool {
    rec.agent == Role::Follower && rec.action.is_environment()
}

/// States before every action plus the final one.
fn states(session: &Session) -> Vec<WorldState> {
    let sim = Simulator::new(session.sim_config.clone());
    let mut out = Vec::with_capacity(session.actions.len() + 1);
    let mut world = session.initial_state.clone();
    for rec in &session.actions {
        let (next, _) = sim.step(&world, &rec.action, rec.agent);
        out.push(std::mem::replace(&mut world, next));
    }
    out.push(world);
    out
}

/// One instance per dialogue act whose following window (up to the next
/// dialogue act) holds an object interaction and changes the task state.
pub fn segment_edh(session: &Session, lib: &TaskLibrary, options: &EdhOptions) -> Result<Vec<Instance>, HarnessError> {
    replay(session)?;
    let ground = lib
        .ground(&session.task_name, &session.task_params)
        .map_err(crate::checker::CheckError::from)?;
    let tree = TaskTree::build(&ground, lib)?;
    let snapshots = states(session);
    let acts = &session.actions;
    let dialogue: Vec<usize> = (0..acts.len()).filter(|&i| acts[i].action.is_dialogue()).collect();
    let mut out = Vec::new();
    for (n, &d) in dialogue.iter().enumerate() {
        let end = dialogue.get(n + 1).copied().unwrap_or(acts.len());
        let window = &acts[d + 1..end];
        let interacts = window.iter().any(|r| is_reference(r) && r.action.is_interaction() && r.success);
        if !interacts {
            continue;
        }
        let start = &snapshots[d + 1];
        let deltas = relevant_deltas(&tree, start, &snapshots[end]);
        if deltas.is_empty() {
            continue;
        }
        let history = acts[..=d]
            .iter()
            .filter(|r| {
                let query = matches!(r.action, Action::ProgressCheck | Action::SearchObject { .. });
                let camera = matches!(r.action, Action::Camera { .. });
                !(options.drop_commander_queries && query) && !(options.drop_camera && camera)
            })
            .cloned()
            .collect();
        let mut reference: Vec<Action> = window.iter().filter(|r| is_reference(r)).map(|r| r.action.clone()).collect();
        reference.push(Action::Stop);
        out.push(Instance {
            version: INSTANCE_FORMAT_VERSION,
            kind: InstanceKind::Edh,
            instance_id: format!("{}.edh{}", session.session_id, out.len()),
            session_id: session.session_id.clone(),
            task_name: session.task_name.clone(),
            task_params: session.task_params.clone(),
            start_state: start.clone(),
            history,
            reference_actions: reference,
            expected_deltas: deltas,
            relevance_filtered: true,
        });
    }
    Ok(out)
}

/// The whole dialogue, in time order, and every Follower environment action.
pub fn extract_tfd(session: &Session) -> Result<Instance, HarnessError> {
    let (final_state, _) = replay(session)?;
    let deltas = diff_states(&session.initial_state, &final_state);
    if deltas.is_empty() {
        return Err(HarnessError::NoDeltas);
    }
    let mut dialogue: Vec<_> = session.actions.iter().filter(|r| r.action.is_dialogue()).cloned().collect();
    dialogue.sort_by_key(|r| r.time_ms);
    let mut reference: Vec<Action> = session
        .actions
        .iter()
        .filter(|r| is_reference(r))
        .map(|r| r.action.clone())
        .collect();
    reference.push(Action::Stop);
    Ok(Instance {
        version: INSTANCE_FORMAT_VERSION,
        kind: InstanceKind::Tfd,
        instance_id: format!("{}.tfd", session.session_id),
        session_id: session.session_id.clone(),
        task_name: session.task_name.clone(),
        task_params: session.task_params.clone(),
        start_state: session.initial_state.clone(),
        history: dialogue,
        reference_actions: reference,
        expected_deltas: deltas,
        relevance_filtered: false,
    })
}
