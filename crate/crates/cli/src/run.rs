use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use teach_core::agents::{run_tatc_episode, EpisodeOutcome, RuleCommander, RuleFollower};
use teach_core::protocol::{serve as serve_pairs, ServerConfig};
use teach_core::sim::Scenario;

use crate::{io, record, Config, ScenarioSource};

pub fn gen(cfg: &Config, src: &ScenarioSource, out: &Path) -> Result<bool> {
    let lib = io::library(cfg)?;
    let scenarios = io::scenarios(cfg, src, &lib)?;
    let mut rows = Vec::new();
    for s in &scenarios {
        let name = format!("{}-{}-{}.json", s.floorplan_id, s.task_name.to_lowercase().replace(' ', "_"), s.seed);
        let path = io::write(out, &name, &s.to_json())?;
        rows.push(record! {
            "file" => path.display().to_string(),
            "floorplan" => s.floorplan_id,
            "task" => s.task_name,
            "seed" => s.seed,
            "objects" => s.initial_state.objects.len(),
        });
    }
    io::emit(cfg.format, &rows, record! { "scenarios" => scenarios.len() });
    Ok(true)
}

/// Run rule-agent episodes on `workers` threads; results keep scenario order.
pub fn episodes(cfg: &Config, scenarios: &[Scenario]) -> Result<Vec<EpisodeOutcome>> {
    let lib = io::library(cfg)?;
    let sim = io::simulator();
    let limits = io::episode_limits(cfg);
    let workers = (cfg.workers as usize).min(scenarios.len()).max(1);
    let mut slots: Vec<Option<Result<EpisodeOutcome>>> = (0..scenarios.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (lib, sim) = (&lib, &sim);
                scope.spawn(move || {
                    (w..scenarios.len())
                        .step_by(workers)
                        .map(|i| {
                            let mut commander = RuleCommander::new(io::commander_config(cfg));
                            let mut follower = RuleFollower::new();
                            let out = run_tatc_episode(&scenarios[i], lib, &mut commander, &mut follower, &limits, sim);
                            (i, out.map_err(anyhow::Error::from))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("episode worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every scenario ran")).collect()
}

fn halt_name(h: &impl serde::Serialize) -> String {
    serde_json::to_value(h).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn play(cfg: &Config, src: &ScenarioSource, out: Option<&Path>) -> Result<bool> {
    let lib = io::library(cfg)?;
    let scenarios = io::scenarios(cfg, src, &lib)?;
    let outcomes = episodes(cfg, &scenarios)?;
    let mut rows = Vec::new();
    for o in &outcomes {
        let s = &o.session;
        let file = match out {
            Some(dir) => io::write(dir, &format!("{}.json", s.session_id), &s.to_json())?.display().to_string(),
            None => String::new(),
        };
        rows.push(record! {
            "session" => s.session_id,
            "success" => o.success,
            "halt" => halt_name(&o.halt),
            "actions" => s.actions.len(),
            "utterances" => s.utterance_count(),
            "file" => file,
        });
    }
    let ok = outcomes.iter().filter(|o| o.success).count();
    let rate = if outcomes.is_empty() { 0.0 } else { ok as f64 / outcomes.len() as f64 };
    io::emit(
        cfg.format,
        &rows,
        record! { "episodes" => outcomes.len(), "successes" => ok, "success_rate" => rate },
    );
    Ok(true)
}

pub fn serve(cfg: &Config, src: &ScenarioSource, addr: &str, out: Option<PathBuf>, idle: u64, max_pairs: Option<usize>) -> Result<bool> {
    let lib = io::library(cfg)?;
    let scenarios = io::scenarios(cfg, src, &lib)?;
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    eprintln!("listening on {}", listener.local_addr()?);
    let config = ServerConfig {
        scenarios,
        lib,
        sim: io::simulator(),
        limits: io::episode_limits(cfg),
        out_dir: out,
        idle_timeout: Duration::from_secs(idle.max(1)),
        max_pairs,
    };
    let summaries = serve_pairs(listener, config)?;
    let rows: Vec<_> = summaries
        .iter()
        .map(|s| record! { "session" => s.session_id, "success" => s.success, "halt" => s.halt })
        .collect();
    let ok = summaries.iter().filter(|s| s.success).count();
    io::emit(cfg.format, &rows, record! { "episodes" => summaries.len(), "successes" => ok });
    Ok(true)
}
