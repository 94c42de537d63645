//! Agent-side loops: drive an in-process agent from messages on a [`Channel`].

use super::{Channel, EpisodeEnd, EpisodeStart, Message, ObservationPayload, ProtocolError};
use crate::agents::{CommanderAgent, FollowerAgent};
use crate::sim::{Action, Role};
use crate::world::WorldState;

fn hello<C: Channel>(ch: &mut C, role: Role) -> Result<(), ProtocolError> {
    ch.send(&Message::EpisodeStart(EpisodeStart {
        role,
        mode: None,
        episode_id: None,
        history: Vec::new(),
    }))
}

fn reply<C: Channel>(ch: &mut C, action: Action) -> Result<(), ProtocolError> {
    ch.send(&match action {
        Action::Utterance { text } => Message::Utterance(text),
        a => Message::Action(a),
    })
}

fn closed<T>(r: Result<T, ProtocolError>, ends: &[EpisodeEnd]) -> Result<Option<T>, ProtocolError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(ProtocolError::Closed) if !ends.is_empty() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Announce the Follower role, then answer observations until the server
/// hangs up. `make` builds a fresh agent for every episode.
pub fn run_follower<C, F>(ch: &mut C, mut make: F) -> Result<Vec<EpisodeEnd>, ProtocolError>
where
    C: Channel,
    F: FnMut(&EpisodeStart) -> Box<dyn FollowerAgent>,
{
    hello(ch, Role::Follower)?;
    let mut ends = Vec::new();
    let mut agent: Option<Box<dyn FollowerAgent>> = None;
    while let Some(msg) = closed(ch.recv(), &ends)? {
        match msg {
            Message::EpisodeStart(start) => {
                if let Some(id) = &start.episode_id {
                    ch.set_session(id);
                }
                agent = Some(make(&start));
            }
            Message::Observation(p) => {
                let ObservationPayload::Follower { observation, heard } = *p else {
                    return Err(ProtocolError::Unexpected("commander observation".into()));
                };
                let a = agent.as_mut().ok_or_else(|| ProtocolError::Unexpected("observation before episode_start".into()))?;
                reply(ch, a.act(&observation, heard.as_deref()))?;
            }
            Message::EpisodeEnd(end) => {
                agent = None;
                ends.push(end);
            }
            Message::Error(_) => {}
            other => return Err(ProtocolError::Unexpected(other.kind().into())),
        }
    }
    Ok(ends)
}

/// Commander counterpart of [`run_follower`]. Progress reports and search
/// results are answered against the last world snapshot received.
pub fn run_commander<C, F>(ch: &mut C, mut make: F) -> Result<Vec<EpisodeEnd>, ProtocolError>
where
    C: Channel,
    F: FnMut(&EpisodeStart) -> Box<dyn CommanderAgent>,
{
    hello(ch, Role::Commander)?;
    let mut ends = Vec::new();
    let mut agent: Option<Box<dyn CommanderAgent>> = None;
    let mut world: Option<WorldState> = None;
    while let Some(msg) = closed(ch.recv(), &ends)? {
        match msg {
            Message::EpisodeStart(start) => {
                if let Some(id) = &start.episode_id {
                    ch.set_session(id);
                }
                agent = Some(make(&start));
                world = None;
            }
            Message::EpisodeEnd(end) => {
                agent = None;
                ends.push(end);
            }
            Message::Error(_) => {}
            msg => {
                let kind = msg.kind();
                let (snapshot, event) = msg.into_commander_event().ok_or_else(|| ProtocolError::Unexpected(kind.into()))?;
                if snapshot.is_some() {
                    world = snapshot;
                }
                let w = world.as_ref().ok_or_else(|| ProtocolError::Unexpected(format!("{kind} before any world snapshot")))?;
                let a = agent.as_mut().ok_or_else(|| ProtocolError::Unexpected(format!("{kind} before episode_start")))?;
                reply(ch, a.act(w, &event))?;
            }
        }
    }
    Ok(ends)
}
