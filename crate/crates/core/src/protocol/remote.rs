//! Server-side stand-ins that forward agent decisions over a [`Channel`].

use std::collections::BTreeSet;

use super::{Channel, EpisodeEnd, EpisodeStart, ErrorPayload, Message, Mode, ObservationPayload, ProtocolError};
use crate::agents::{CommanderAgent, CommanderEvent, FollowerAgent};
use crate::harness::{EvalOutcome, FollowerPolicy, Instance};
use crate::sim::{Action, Observation, Role};
use crate::world::{PropertyDelta, WorldState};

fn allowed(role: Role, a: &Action) -> bool {
    match a {
        Action::Motion { .. } | Action::Interact { .. } => role == Role::Follower,
        Action::ProgressCheck | Action::SearchObject { .. } | Action::Camera { .. } => role == Role::Commander,
        Action::Utterance { .. } | Action::Stop => true,
    }
}

/// Receive one action, flagging (but passing on) actions the role may not take.
fn recv_action<C: Channel>(ch: &mut C, role: Role) -> Result<Action, ProtocolError> {
    let a = ch.recv()?.into_action()?;
    if !allowed(role, &a) {
        ch.send(&Message::Error(ErrorPayload {
            code: "role-violation".into(),
            message: format!("{role} may not take this action"),
            echo_seq: None,
        }))?;
    }
    Ok(a)
}

pub struct RemoteFollower<C> {
    pub channel: C,
    pub error: Option<ProtocolError>,
}

impl<C: Channel> RemoteFollower<C> {
    pub fn new(channel: C) -> Self {
        RemoteFollower { channel, error: None }
    }

    pub fn begin(&mut self, episode_id: &str) -> Result<(), ProtocolError> {
        self.error = None;
        self.channel.set_session(episode_id);
        self.channel.send(&Message::EpisodeStart(EpisodeStart {
            role: Role::Follower,
            mode: Some(Mode::Tatc),
            episode_id: Some(episode_id.to_string()),
            history: Vec::new(),
        }))
    }

    pub fn finish(&mut self, end: EpisodeEnd) -> Result<(), ProtocolError> {
        self.channel.send(&Message::EpisodeEnd(end))
    }
}

impl<C: Channel> FollowerAgent for RemoteFollower<C> {
    fn act(&mut self, obs: &Observation, heard: Option<&str>) -> Action {
        if self.error.is_some() {
            return Action::Stop;
        }
        let msg = Message::Observation(Box::new(ObservationPayload::Follower {
            observation: obs.clone(),
            heard: heard.map(String::from),
        }));
        match self.channel.send(&msg).and_then(|_| recv_action(&mut self.channel, Role::Follower)) {
            Ok(a) => a,
            Err(e) => {
                self.error = Some(e);
                Action::Stop
            }
        }
    }
}

pub struct RemoteCommander<C> {
    pub channel: C,
    pub error: Option<ProtocolError>,
}

impl<C: Channel> RemoteCommander<C> {
    pub fn new(channel: C) -> Self {
        RemoteCommander { channel, error: None }
    }

    pub fn begin(&mut self, episode_id: &str) -> Result<(), ProtocolError> {
        self.error = None;
        self.channel.set_session(episode_id);
        self.channel.send(&Message::EpisodeStart(EpisodeStart {
            role: Role::Commander,
            mode: Some(Mode::Tatc),
            episode_id: Some(episode_id.to_string()),
            history: Vec::new(),
        }))
    }

    pub fn finish(&mut self, end: EpisodeEnd) -> Result<(), ProtocolError> {
        self.channel.send(&Message::EpisodeEnd(end))
    }
}

impl<C: Channel> CommanderAgent for RemoteCommander<C> {
    fn act(&mut self, world: &WorldState, event: &CommanderEvent) -> Action {
        if self.error.is_some() {
            return Action::Stop;
        }
        let msg = match event {
            CommanderEvent::FollowerUtterance(text) => Message::Observation(Box::new(ObservationPayload::Commander {
                world: world.clone(),
                utterance: text.clone(),
            })),
            CommanderEvent::ProgressReport(r) => Message::ProgressReport(r.clone()),
            CommanderEvent::SearchResult(h) => Message::SearchResult(h.clone()),
        };
        match self.channel.send(&msg).and_then(|_| recv_action(&mut self.channel, Role::Commander)) {
            Ok(a) => a,
            Err(e) => {
                self.error = Some(e);
                Action::Stop
            }
        }
    }
}

/// A Follower under evaluation behind the protocol.
pub struct RemotePolicy<C> {
    pub channel: C,
    expected: BTreeSet<PropertyDelta>,
}

impl<C: Channel> RemotePolicy<C> {
    pub fn new(channel: C) -> Self {
        RemotePolicy {
            channel,
            expected: BTreeSet::new(),
        }
    }
}

impl<C: Channel> FollowerPolicy for RemotePolicy<C> {
    fn start(&mut self, instance: &Instance) -> Result<(), String> {
        self.expected = instance.expected_deltas.clone();
        self.channel.set_session(&instance.instance_id);
        self.channel
            .send(&Message::EpisodeStart(EpisodeStart {
                role: Role::Follower,
                mode: Some(instance.kind.into()),
                episode_id: Some(instance.instance_id.clone()),
                history: instance.history.clone(),
            }))
            .map_err(|e| e.to_string())
    }

    fn act(&mut self, obs: &Observation) -> Result<Action, String> {
        let msg = Message::Observation(Box::new(ObservationPayload::Follower {
            observation: obs.clone(),
            heard: None,
        }));
        self.channel
            .send(&msg)
            .and_then(|_| recv_action(&mut self.channel, Role::Follower))
            .map_err(|e| e.to_string())
    }

    fn end(&mut self, outcome: &EvalOutcome) {
        let halt = serde_json::to_value(&outcome.halt)
            .ok()
            .and_then(|v| v.as_str().map(String::from).or_else(|| v.as_object().and_then(|o| o.keys().next().cloned())))
            .unwrap_or_default();
        let _ = self.channel.send(&Message::EpisodeEnd(EpisodeEnd {
            success: self.expected.is_subset(&outcome.achieved_deltas),
            halt,
        }));
    }
}
