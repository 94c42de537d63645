//! TCP server pairing one remote Commander with one remote Follower and
//! running a fixed list of scenarios through them.

use std::io::{BufReader, BufWriter};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::{Channel, EpisodeEnd, ErrorPayload, Message, ProtocolError, RemoteCommander, RemoteFollower, StreamChannel};
use crate::agents::{run_tatc_episode, EpisodeLimits, EpisodeOutcome};
use crate::sim::{Role, Scenario, Simulator};
use crate::tdl::TaskLibrary;

pub type TcpChannel = StreamChannel<BufReader<TcpStream>, BufWriter<TcpStream>>;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub scenarios: Vec<Scenario>,
    pub lib: TaskLibrary,
    pub sim: Simulator,
    pub limits: EpisodeLimits,
    /// Recorded sessions are written here as `<session_id>.json`.
    pub out_dir: Option<PathBuf>,
    /// Longest wait for any single agent message.
    pub idle_timeout: Duration,
    /// Stop accepting after this many pairs; `None` serves forever.
    pub max_pairs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EpisodeSummary {
    pub session_id: String,
    pub success: bool,
    pub halt: String,
}

fn halt_name<T: serde::Serialize>(h: &T) -> String {
    serde_json::to_value(h).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn tcp_channel(stream: TcpStream, idle: Duration) -> std::io::Result<TcpChannel> {
    stream.set_read_timeout(Some(idle))?;
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    Ok(StreamChannel::new(reader, BufWriter::new(stream)))
}

/// Read the opening `episode_start` that names a client's role.
pub fn read_hello<C: Channel>(ch: &mut C) -> Result<Role, ProtocolError> {
    match ch.recv()? {
        Message::EpisodeStart(s) => Ok(s.role),
        other => {
            let err = ProtocolError::Unexpected(other.kind().into());
            ch.send(&Message::Error(ErrorPayload {
                code: err.code().into(),
                message: "expected episode_start naming a role".into(),
                echo_seq: None,
            }))?;
            Err(err)
        }
    }
}

/// Run every scenario through a connected pair. A transport failure ends the
/// run after the episode it occurred in.
pub fn run_pair<A: Channel, B: Channel>(commander: A, follower: B, config: &ServerConfig) -> Vec<(EpisodeOutcome, Option<ProtocolError>)> {
    let mut cmd = RemoteCommander::new(commander);
    let mut fol = RemoteFollower::new(follower);
    let mut out = Vec::new();
    for sc in &config.scenarios {
        let id = format!("{}-{}-{}", sc.floorplan_id, sc.task_name.to_lowercase().replace(' ', "_"), sc.seed);
        if cmd.begin(&id).and_then(|_| fol.begin(&id)).is_err() {
            break;
        }
        let Ok(outcome) = run_tatc_episode(sc, &config.lib, &mut cmd, &mut fol, &config.limits, &config.sim) else {
            continue;
        };
        let end = EpisodeEnd {
            success: outcome.success,
            halt: halt_name(&outcome.halt),
        };
        let _ = cmd.finish(end.clone());
        let _ = fol.finish(end);
        if let Some(dir) = &config.out_dir {
            let _ = std::fs::write(dir.join(format!("{}.json", outcome.session.session_id)), outcome.session.to_json());
        }
        let err = cmd.error.take().or(fol.error.take());
        let fatal = matches!(err, Some(ProtocolError::Closed | ProtocolError::Timeout | ProtocolError::Io(_)));
        out.push((outcome, err));
        if fatal {
            break;
        }
    }
    out
}

/// Accept clients on `listener`, pair them by role in arrival order and run
/// the configured scenarios for each pair on its own thread.
pub fn serve(listener: TcpListener, config: ServerConfig) -> std::io::Result<Vec<EpisodeSummary>> {
    let config = Arc::new(config);
    let mut waiting_cmd: Option<TcpChannel> = None;
    let mut waiting_fol: Option<TcpChannel> = None;
    let mut workers = Vec::new();
    let mut pairs = 0;
    for stream in listener.incoming() {
        if config.max_pairs.is_some_and(|m| pairs >= m) {
            break;
        }
        let Ok(mut ch) = stream.and_then(|s| tcp_channel(s, config.idle_timeout)) else {
            continue;
        };
        match read_hello(&mut ch) {
            Ok(Role::Commander) if waiting_cmd.is_none() => waiting_cmd = Some(ch),
            Ok(Role::Follower) if waiting_fol.is_none() => waiting_fol = Some(ch),
            Ok(role) => {
                let _ = ch.send(&Message::Error(ErrorPayload {
                    code: "role-taken".into(),
                    message: format!("a {role} is already waiting"),
                    echo_seq: None,
                }));
            }
            Err(_) => {}
        }
        if waiting_cmd.is_some() && waiting_fol.is_some() {
            let (c, f) = (waiting_cmd.take().unwrap(), waiting_fol.take().unwrap());
            let cfg = Arc::clone(&config);
            workers.push(thread::spawn(move || run_pair(c, f, &cfg)));
            pairs += 1;
            if config.max_pairs.is_some_and(|m| pairs >= m) {
                break;
            }
        }
    }
    Ok(workers
        .into_iter()
        .filter_map(|w| w.join().ok())
        .flatten()
        .map(|(o, _)| EpisodeSummary {
            session_id: o.session.session_id,
            success: o.success,
            halt: halt_name(&o.halt),
        })
        .collect())
}
