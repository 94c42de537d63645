use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod agent;
mod data;
mod io;
mod run;

#[derive(Parser)]
#[command(name = "teach", version, about = "Task-driven household dialogue benchmark engine")]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Each can also come from the
/// environment.
#[derive(Args, Clone, Debug)]
pub struct Config {
    /// Task definition directory (defaults to the shipped definitions).
    #[arg(long, global = true, env = "TEACH_TASKS")]
    pub tasks: Option<PathBuf>,
    /// Object class hierarchy file (defaults to the built-in one).
    #[arg(long, global = true, env = "TEACH_HIERARCHY")]
    pub hierarchy: Option<PathBuf>,
    /// Floorplan directory (defaults to the built-in floorplans).
    #[arg(long, global = true, env = "TEACH_FLOORPLANS")]
    pub floorplans: Option<PathBuf>,
    #[arg(long, global = true, env = "TEACH_MAX_STEPS", default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_steps: u64,
    #[arg(long, global = true, env = "TEACH_MAX_FAILS", default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_fails: u64,
    #[arg(long, global = true, env = "TEACH_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, env = "TEACH_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: u64,
    /// Restrict the rule Commander to the reduced policy set.
    #[arg(long, global = true, env = "TEACH_COMPAT")]
    pub compat: bool,
    #[arg(long, global = true, value_enum, env = "TEACH_FORMAT", default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Record,
    Table,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalKind {
    Edh,
    Tfd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SegmentKind {
    Edh,
    Tfd,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgentRole {
    Commander,
    Follower,
}

#[derive(Args, Clone, Debug)]
pub struct ScenarioSource {
    /// Task name, e.g. "Make Coffee".
    #[arg(long, conflicts_with = "scenarios")]
    pub task: Option<String>,
    /// Task parameters; defaults to a sample set for the task.
    #[arg(long, num_args = 1..)]
    pub params: Vec<String>,
    /// Seed range `a..b` (both ends included) or a single seed.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    /// Previously generated scenario files or directories.
    #[arg(long, num_args = 1..)]
    pub scenarios: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-check a task definition library.
    Validate { dir: Option<PathBuf> },
    /// Generate seeded scenarios.
    Gen {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run rule-based Commander and Follower episodes and record sessions.
    Play {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute session files and check that they reproduce.
    Replay {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Cut sessions into EDH and/or TfD instances.
    Segment {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SegmentKind::Both)]
        kind: SegmentKind,
        /// Keep Commander camera motions in histories.
        #[arg(long)]
        keep_camera: bool,
        /// Drop Commander Progress Check and SearchObject records from histories.
        #[arg(long)]
        drop_commander_queries: bool,
    },
    /// Evaluate a Follower on EDH or TfD instances.
    Eval {
        #[arg(value_enum)]
        kind: EvalKind,
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        /// External agent speaking the wire protocol on stdin/stdout. Without
        /// it the reference actions are replayed.
        #[arg(long)]
        agent_cmd: Option<String>,
    },
    /// Serve TATC episodes to remote Commander and Follower agents.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seconds to wait for any agent message.
        #[arg(long, default_value_t = 30)]
        idle_timeout: u64,
        /// Exit after this many agent pairs.
        #[arg(long)]
        max_pairs: Option<usize>,
    },
    /// Per-task corpus statistics.
    Stats {
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Run a reference rule agent over the wire protocol.
    Agent {
        #[arg(value_enum)]
        role: AgentRole,
        /// Server address; speaks on stdin/stdout when absent.
        #[arg(long)]
        connect: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = &cli.config;
    let result = match cli.command {
        Command::Validate { dir } => data::validate(cfg, dir),
        Command::Gen { source, out } => run::gen(cfg, &source, &out),
        Command::Play { source, out } => run::play(cfg, &source, out.as_deref()),
        Command::Replay { sessions } => data::replay(cfg, &sessions),
        Command::Segment {
            sessions,
            out,
            kind,
            keep_camera,
            drop_commander_queries,
        } => data::segment(cfg, &sessions, &out, kind, keep_camera, drop_commander_queries),
        Command::Eval { kind, instances, agent_cmd } => data::eval(cfg, kind, &instances, agent_cmd.as_deref()),
        Command::Serve {
            port,
            host,
            source,
            out,
            idle_timeout,
            max_pairs,
        } => run::serve(cfg, &source, &format!("{host}:{port}"), out, idle_timeout, max_pairs),
        Command::Stats { sessions } => data::stats(cfg, &sessions),
        Command::Agent { role, connect } => agent::run(cfg, role, connect.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
