//! Newline-delimited JSON wire protocol for external Commander and Follower
//! agents. Every line is one envelope `{version, session_id, seq, kind, payload}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::CommanderEvent;
use crate::checker::ProgressReport;
use crate::harness::InstanceKind;
use crate::sim::{Action, ActionRecord, Observation, Role, SearchHit};
use crate::world::WorldState;

pub mod channel;
pub mod client;
pub mod remote;
pub mod server;

pub use channel::{Channel, StreamChannel};
pub use client::{run_commander, run_follower};
pub use remote::{RemoteCommander, RemoteFollower, RemotePolicy};
pub use server::{read_hello, run_pair, serve, tcp_channel, EpisodeSummary, ServerConfig};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    pub session_id: String,
    pub seq: u64,
    pub kind: String,
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Tatc,
    Edh,
    Tfd,
}

impl From<InstanceKind> for Mode {
    fn from(k: InstanceKind) -> Self {
        match k {
            InstanceKind::Edh => Mode::Edh,
            InstanceKind::Tfd => Mode::Tfd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStart {
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<ActionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEnd {
    pub success: bool,
    pub halt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub echo_seq: Option<u64>,
}

/// What an agent sees each turn: an egocentric Follower view, or the world
/// snapshot plus the triggering Follower utterance for the Commander.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationPayload {
    Follower {
        observation: Observation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heard: Option<String>,
    },
    Commander {
        world: WorldState,
        utterance: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    EpisodeStart(EpisodeStart),
    Observation(Box<ObservationPayload>),
    Action(Action),
    Utterance(String),
    ProgressReport(ProgressReport),
    SearchResult(Vec<SearchHit>),
    EpisodeEnd(EpisodeEnd),
    Error(ErrorPayload),
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("unknown message kind `{0}`")]
    UnknownKind(String),
    #[error("unexpected `{0}` message")]
    Unexpected(String),
    #[error("connection closed")]
    Closed,
    #[error("timed out waiting for the agent")]
    Timeout,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("agent error {0}: {1}")]
    Remote(String, String),
}

impl ProtocolError {
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::Malformed(_) => "malformed",
            ProtocolError::Version(_) => "version",
            ProtocolError::UnknownKind(_) => "unknown-kind",
            ProtocolError::Unexpected(_) => "unexpected",
            ProtocolError::Closed => "closed",
            ProtocolError::Timeout => "timeout",
            ProtocolError::Io(_) => "io",
            ProtocolError::Remote(..) => "remote",
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("protocol payload serializes")
}

fn from_value<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T, ProtocolError> {
    T::deserialize(v).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::EpisodeStart(_) => "episode_start",
            Message::Observation(_) => "observation",
            Message::Action(_) => "action",
            Message::Utterance(_) => "utterance",
            Message::ProgressReport(_) => "progress_report",
            Message::SearchResult(_) => "search_result",
            Message::EpisodeEnd(_) => "episode_end",
            Message::Error(_) => "error",
        }
    }

    pub fn payload(&self) -> Value {
        match self {
            Message::EpisodeStart(p) => to_value(p),
            Message::Observation(p) => to_value(p),
            Message::Action(a) => to_value(a),
            Message::Utterance(text) => serde_json::json!({ "text": text }),
            Message::ProgressReport(r) => to_value(r),
            Message::SearchResult(h) => serde_json::json!({ "hits": h }),
            Message::EpisodeEnd(p) => to_value(p),
            Message::Error(p) => to_value(p),
        }
    }

    pub fn envelope(&self, session_id: &str, seq: u64) -> Envelope {
        Envelope {
            version: PROTOCOL_VERSION,
            session_id: session_id.to_string(),
            seq,
            kind: self.kind().to_string(),
            payload: self.payload(),
        }
    }

    pub fn from_envelope(env: &Envelope) -> Result<Message, ProtocolError> {
        if env.version != PROTOCOL_VERSION {
            return Err(ProtocolError::Version(env.version));
        }
        let p = &env.payload;
        Ok(match env.kind.as_str() {
            "episode_start" => Message::EpisodeStart(from_value(p)?),
            "observation" => Message::Observation(Box::new(from_value(p)?)),
            "action" => match from_value::<Action>(p)? {
                Action::Utterance { text } => Message::Utterance(text),
                a => Message::Action(a),
            },
            "utterance" => {
                let text = p.get("text").and_then(Value::as_str).ok_or_else(|| ProtocolError::Malformed("utterance needs text".into()))?;
                Message::Utterance(text.to_string())
            }
            "progress_report" => Message::ProgressReport(from_value(p)?),
            "search_result" => Message::SearchResult(from_value(p.get("hits").unwrap_or(&Value::Null))?),
            "episode_end" => Message::EpisodeEnd(from_value(p)?),
            "error" => Message::Error(from_value(p)?),
            other => return Err(ProtocolError::UnknownKind(other.to_string())),
        })
    }

    /// The action an agent reply stands for, utterances included.
    pub fn into_action(self) -> Result<Action, ProtocolError> {
        match self {
            Message::Action(a) => Ok(a),
            Message::Utterance(text) => Ok(Action::Utterance { text }),
            Message::Error(e) => Err(ProtocolError::Remote(e.code, e.message)),
            other => Err(ProtocolError::Unexpected(other.kind().to_string())),
        }
    }

    /// Commander-side view of a server message.
    pub fn into_commander_event(self) -> Option<(Option<WorldState>, CommanderEvent)> {
        match self {
            Message::Observation(p) => match *p {
                ObservationPayload::Commander { world, utterance } => Some((Some(world), CommanderEvent::FollowerUtterance(utterance))),
                ObservationPayload::Follower { .. } => None,
            },
            Message::ProgressReport(r) => Some((None, CommanderEvent::ProgressReport(r))),
            Message::SearchResult(h) => Some((None, CommanderEvent::SearchResult(h))),
            _ => None,
        }
    }
}

/// One line of text, no trailing newline.
pub fn encode(env: &Envelope) -> String {
    serde_json::to_string(env).expect("envelope serializes")
}

pub fn decode(line: &str) -> Result<Envelope, ProtocolError> {
    serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// Best-effort `seq` of a line that failed to decode.
pub fn salvage_seq(line: &str) -> Option<u64> {
    serde_json::from_str::<Value>(line).ok()?.get("seq")?.as_u64()
}
