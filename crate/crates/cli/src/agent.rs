use std::io::{stdin, stdout, BufReader, BufWriter};
use std::net::TcpStream;

use anyhow::{Context, Result};
use teach_core::agents::{CommanderAgent, FollowerAgent, RuleCommander, RuleFollower};
use teach_core::protocol::{run_commander, run_follower, Channel, EpisodeEnd, EpisodeStart, Mode, StreamChannel};
use teach_core::sim::{Action, Observation, Role};

use crate::{io, AgentRole, Config};

/// Rule Follower for EDH/TfD episodes: carries out the last Commander
/// instruction in the history, then stops.
struct HistoryFollower {
    inner: RuleFollower,
    instruction: Option<String>,
    started: bool,
}

impl FollowerAgent for HistoryFollower {
    fn act(&mut self, obs: &Observation, _heard: Option<&str>) -> Action {
        let heard = self.instruction.take();
        let first = !self.started;
        self.started = true;
        if !first && self.inner.pending() == 0 {
            return Action::Stop;
        }
        match self.inner.act(obs, heard.as_deref()) {
            Action::Utterance { .. } => Action::Stop,
            a => a,
        }
    }
}

fn follower_for(start: &EpisodeStart) -> Box<dyn FollowerAgent> {
    match start.mode {
        Some(Mode::Edh | Mode::Tfd) => {
            let instruction = start.history.iter().rev().find_map(|r| match (&r.agent, &r.action) {
                (Role::Commander, Action::Utterance { text }) => Some(text.clone()),
                _ => None,
            });
            Box::new(HistoryFollower {
                inner: RuleFollower::new(),
                instruction,
                started: false,
            })
        }
        _ => Box::new(RuleFollower::new()),
    }
}

fn drive<C: Channel>(cfg: &Config, role: AgentRole, ch: &mut C) -> Result<Vec<EpisodeEnd>> {
    let config = io::commander_config(cfg);
    Ok(match role {
        AgentRole::Follower => run_follower(ch, follower_for)?,
        AgentRole::Commander => run_commander(ch, |_| Box::new(RuleCommander::new(config.clone())) as Box<dyn CommanderAgent>)?,
    })
}

pub fn run(cfg: &Config, role: AgentRole, connect: Option<&str>) -> Result<bool> {
    let ends = match connect {
        Some(addr) => {
            let stream = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
            let mut ch = StreamChannel::new(BufReader::new(stream.try_clone()?), BufWriter::new(stream));
            drive(cfg, role, &mut ch)?
        }
        None => {
            let mut ch = StreamChannel::new(stdin().lock(), stdout().lock());
            drive(cfg, role, &mut ch)?
        }
    };
    let ok = ends.iter().filter(|e| e.success).count();
    eprintln!("{} episodes, {} successful", ends.len(), ok);
    Ok(true)
}
