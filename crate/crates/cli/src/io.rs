use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{Map, Value};
use teach_core::agents::{CommanderConfig, EpisodeLimits};
use teach_core::fuzz::sample_params;
use teach_core::harness::InferenceLimits;
use teach_core::sim::{generate_scenario, Floorplan, Scenario, ScenarioError, Session, Simulator};
use teach_core::tdl::TaskLibrary;
use teach_core::world::ClassHierarchy;

use crate::{Config, Format, ScenarioSource};

pub fn library(cfg: &Config) -> Result<TaskLibrary> {
    let hierarchy = match &cfg.hierarchy {
        Some(p) => ClassHierarchy::from_json(&read(p)?).with_context(|| p.display().to_string())?,
        None => ClassHierarchy::builtin(),
    };
    match &cfg.tasks {
        Some(dir) => Ok(TaskLibrary::from_dir(dir, hierarchy)?),
        None if cfg.hierarchy.is_none() => Ok(TaskLibrary::shipped()),
        None => {
            let texts: Vec<&str> = TaskLibrary::shipped_source_texts().iter().map(|(_, t)| *t).collect();
            Ok(teach_core::tdl::load_library(&texts, hierarchy)?)
        }
    }
}

pub fn floorplans(cfg: &Config) -> Result<Vec<Floorplan>> {
    match &cfg.floorplans {
        Some(dir) => Ok(Floorplan::load_dir(dir)?),
        None => Ok(Floorplan::builtin_all()),
    }
}

pub fn episode_limits(cfg: &Config) -> EpisodeLimits {
    EpisodeLimits {
        max_steps: cfg.max_steps as usize,
        max_fails: cfg.max_fails as usize,
        ..EpisodeLimits::default()
    }
}

pub fn inference_limits(cfg: &Config) -> InferenceLimits {
    InferenceLimits {
        max_steps: cfg.max_steps as usize,
        max_fails: cfg.max_fails as usize,
    }
}

pub fn commander_config(cfg: &Config) -> CommanderConfig {
    CommanderConfig {
        legacy_compat: cfg.compat,
        ..CommanderConfig::default()
    }
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Files given directly plus every `*.json` file inside given directories.
pub fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

pub fn load_sessions(paths: &[PathBuf]) -> Result<Vec<(PathBuf, Session)>> {
    expand(paths)?
        .into_iter()
        .map(|p| {
            let s = Session::from_json(&read(&p)?).with_context(|| p.display().to_string())?;
            Ok((p, s))
        })
        .collect()
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let parsed: Result<Vec<u64>, _> = match text.split_once("..") {
        Some((a, b)) => a.trim().parse::<u64>().and_then(|a| b.trim().parse::<u64>().map(|b| (a..=b).collect())),
        None => text.trim().parse::<u64>().map(|s| vec![s]),
    };
    match parsed {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => bail!("bad seed range `{text}`; expected `a..b` or a single seed"),
    }
}

/// Scenarios from files, or generated for each seed on the first floorplan
/// (rotating from `seed mod n`) that can host the task.
pub fn scenarios(cfg: &Config, src: &ScenarioSource, lib: &TaskLibrary) -> Result<Vec<Scenario>> {
    if !src.scenarios.is_empty() {
        return expand(&src.scenarios)?
            .iter()
            .map(|p| Scenario::from_json(&read(p)?).with_context(|| p.display().to_string()))
            .collect();
    }
    let Some(task) = &src.task else {
        bail!("give --task or --scenarios");
    };
    let params = if src.params.is_empty() {
        sample_params(task).into_iter().next().unwrap_or_default()
    } else {
        src.params.clone()
    };
    let ground = lib.ground(task, &params)?;
    let plans = floorplans(cfg)?;
    if plans.is_empty() {
        bail!("no floorplans");
    }
    let mut out = Vec::new();
    for seed in parse_seeds(&src.seeds)? {
        let mut last: Option<ScenarioError> = None;
        let start = (seed % plans.len() as u64) as usize;
        let found = (0..plans.len()).find_map(|k| {
            let plan = &plans[(start + k) % plans.len()];
            generate_scenario(&ground, plan, seed, lib).map_err(|e| last = Some(e)).ok()
        });
        match found {
            Some(s) => out.push(s),
            None => bail!("seed {seed}: {}", last.map(|e| e.to_string()).unwrap_or_default()),
        }
    }
    Ok(out)
}

pub fn simulator() -> Simulator {
    Simulator::default()
}

/// Rows as JSON lines or an aligned table, then a summary.
pub fn emit(format: Format, rows: &[Map<String, Value>], summary: Map<String, Value>) {
    match format {
        Format::Record => {
            for r in rows {
                println!("{}", Value::Object(r.clone()));
            }
            let mut s = Map::new();
            s.insert("summary".into(), Value::Bool(true));
            s.extend(summary);
            println!("{}", Value::Object(s));
        }
        Format::Table => {
            if let Some(first) = rows.first() {
                let cols: Vec<&String> = first.keys().collect();
                let cell = |v: &Value| match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) if n.is_f64() => format!("{:.4}", n.as_f64().unwrap_or_default()),
                    other => other.to_string(),
                };
                let grid: Vec<Vec<String>> = rows.iter().map(|r| cols.iter().map(|c| r.get(*c).map(cell).unwrap_or_default()).collect()).collect();
                let widths: Vec<usize> = cols
                    .iter()
                    .enumerate()
                    .map(|(i, c)| grid.iter().map(|g| g[i].chars().count()).max().unwrap_or(0).max(c.len()))
                    .collect();
                let line = |cells: Vec<String>| {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_string()
                };
                println!("{}", line(cols.iter().map(|c| c.to_string()).collect()));
                for g in grid {
                    println!("{}", line(g));
                }
            }
            let parts: Vec<String> = summary
                .iter()
                .map(|(k, v)| match v {
                    Value::String(s) => format!("{k}={s}"),
                    Value::Number(n) if n.is_f64() => format!("{k}={:.4}", n.as_f64().unwrap_or_default()),
                    other => format!("{k}={other}"),
                })
                .collect();
            println!("{}", parts.join(" "));
        }
    }
}

#[macro_export]
macro_rules! record {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = serde_json::Map::new();
        $(m.insert($k.to_string(), serde_json::json!($v));)*
        m
    }};
}
