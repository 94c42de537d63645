use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use anyhow::{bail, Context, Result};
use teach_core::harness::{
    extract_tfd, macro_average, run_inference, score, segment_edh, session_stats, EdhOptions, EvalOutcome, FollowerPolicy, Instance, InstanceKind,
    Scores, ScriptedFollower,
};
use teach_core::protocol::{read_hello, RemotePolicy, StreamChannel};
use teach_core::sim::replay as replay_session;
use teach_core::tdl::BENCHMARK_TASKS;

use crate::{io, record, Config, EvalKind, SegmentKind};

pub fn validate(cfg: &Config, dir: Option<PathBuf>) -> Result<bool> {
    let cfg = Config {
        tasks: dir.or_else(|| cfg.tasks.clone()),
        ..cfg.clone()
    };
    let lib = match io::library(&cfg) {
        Ok(lib) => lib,
        Err(e) => {
            println!("0 tasks, 1 errors");
            eprintln!("error: {e:#}");
            return Ok(false);
        }
    };
    let rows: Vec<_> = lib
        .definitions()
        .map(|d| {
            record! {
                "task_id" => d.task_id,
                "task" => d.task_name,
                "params" => d.task_nparams,
                "components" => d.components.len(),
                "relations" => d.relations.len(),
            }
        })
        .collect();
    let benchmark = BENCHMARK_TASKS.iter().filter(|t| lib.get(t).is_some()).count();
    if cfg.format == crate::Format::Table {
        println!("{} tasks, 0 errors ({} definitions)", benchmark, lib.len());
    } else {
        io::emit(cfg.format, &rows, record! { "tasks" => benchmark, "definitions" => lib.len(), "errors" => 0 });
    }
    Ok(true)
}

pub fn replay(cfg: &Config, paths: &[PathBuf]) -> Result<bool> {
    let mut rows = Vec::new();
    let mut bad = 0;
    for p in io::expand(paths)? {
        let text = io::read(&p)?;
        let verdict = teach_core::sim::Session::from_json(&text)
            .map_err(|e| (None, e.to_string()))
            .and_then(|s| replay_session(&s).map_err(|d| (Some(d.index), d.reason)));
        let (ok, index, reason) = match verdict {
            Ok(_) => (true, None, String::new()),
            Err((index, reason)) => (false, index, reason),
        };
        if !ok {
            bad += 1;
            match index {
                Some(i) => eprintln!("{}: diverges at action {i}: {reason}", p.display()),
                None => eprintln!("{}: {reason}", p.display()),
            }
        }
        rows.push(record! { "file" => p.display().to_string(), "ok" => ok, "divergence" => index, "reason" => reason });
    }
    io::emit(cfg.format, &rows, record! { "sessions" => rows.len(), "diverged" => bad });
    Ok(bad == 0)
}

pub fn segment(cfg: &Config, paths: &[PathBuf], out: &Path, kind: SegmentKind, keep_camera: bool, drop_queries: bool) -> Result<bool> {
    let lib = io::library(cfg)?;
    let opts = EdhOptions {
        drop_commander_queries: drop_queries,
        drop_camera: !keep_camera,
    };
    let mut rows = Vec::new();
    let (mut edh, mut tfd) = (0, 0);
    for (p, s) in io::load_sessions(paths)? {
        let mut instances = Vec::new();
        if kind != SegmentKind::Tfd {
            instances.extend(segment_edh(&s, &lib, &opts).with_context(|| p.display().to_string())?);
        }
        if kind != SegmentKind::Edh {
            match extract_tfd(&s) {
                Ok(i) => instances.push(i),
                Err(e) => eprintln!("{}: no TfD instance: {e}", p.display()),
            }
        }
        for i in instances {
            let sub = match i.kind {
                InstanceKind::Edh => {
                    edh += 1;
                    "edh"
                }
                InstanceKind::Tfd => {
                    tfd += 1;
                    "tfd"
                }
            };
            let file = io::write(&out.join(sub), &format!("{}.json", i.instance_id), &i.to_json())?;
            rows.push(record! {
                "instance" => i.instance_id,
                "kind" => sub,
                "history" => i.history.len(),
                "reference_actions" => i.reference_actions.len(),
                "expected_deltas" => i.expected_deltas.len(),
                "file" => file.display().to_string(),
            });
        }
    }
    io::emit(cfg.format, &rows, record! { "edh" => edh, "tfd" => tfd });
    Ok(true)
}

fn halt_name(o: &EvalOutcome) -> String {
    match serde_json::to_value(&o.halt) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(serde_json::Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::new(),
    }
}

type ChildChannel = StreamChannel<BufReader<ChildStdout>, BufWriter<ChildStdin>>;

fn spawn_agent(cmd: &str) -> Result<(Child, ChildChannel)> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .with_context(|| format!("starting `{cmd}`"))?;
    let stdout = child.stdout.take().context("agent stdout")?;
    let stdin = child.stdin.take().context("agent stdin")?;
    let mut ch = StreamChannel::new(BufReader::new(stdout), BufWriter::new(stdin));
    read_hello(&mut ch).with_context(|| format!("`{cmd}` did not announce itself"))?;
    Ok((child, ch))
}

/// Each worker owns its agent (and agent process) and its worlds.
fn evaluate(cfg: &Config, instances: &[Instance], agent_cmd: Option<&str>) -> Result<Vec<EvalOutcome>> {
    let lib = io::library(cfg)?;
    let sim = io::simulator();
    let limits = io::inference_limits(cfg);
    let workers = (cfg.workers as usize).min(instances.len()).max(1);
    let mut slots: Vec<Option<EvalOutcome>> = vec![None; instances.len()];
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (lib, sim, limits) = (&lib, &sim, &limits);
                scope.spawn(move || -> Result<Vec<(usize, EvalOutcome)>> {
                    let mut child = None;
                    let mut policy: Box<dyn FollowerPolicy> = match agent_cmd {
                        Some(cmd) => {
                            let (c, ch) = spawn_agent(cmd)?;
                            child = Some(c);
                            Box::new(RemotePolicy::new(ch))
                        }
                        None => Box::new(ScriptedFollower::oracle()),
                    };
                    let mut out = Vec::new();
                    for i in (w..instances.len()).step_by(workers) {
                        out.push((i, run_inference(policy.as_mut(), &instances[i], lib, sim, limits)?));
                    }
                    drop(policy);
                    if let Some(mut c) = child {
                        let _ = c.wait();
                    }
                    Ok(out)
                })
            })
            .collect();
        for h in handles {
            for (i, o) in h.join().expect("eval worker panicked")? {
                slots[i] = Some(o);
            }
        }
        Ok(())
    })?;
    Ok(slots.into_iter().map(|s| s.expect("every instance ran")).collect())
}

pub fn eval(cfg: &Config, kind: EvalKind, paths: &[PathBuf], agent_cmd: Option<&str>) -> Result<bool> {
    let want = match kind {
        EvalKind::Edh => InstanceKind::Edh,
        EvalKind::Tfd => InstanceKind::Tfd,
    };
    let mut instances = Vec::new();
    for p in io::expand(paths)? {
        let i = Instance::from_json(&io::read(&p)?).with_context(|| p.display().to_string())?;
        if i.kind != want {
            bail!("{}: not a {:?} instance", p.display(), want);
        }
        instances.push(i);
    }
    let outcomes = evaluate(cfg, &instances, agent_cmd)?;
    let mut rows = Vec::new();
    let mut scores: Vec<Scores> = Vec::new();
    let mut violations = 0;
    for (i, o) in instances.iter().zip(&outcomes) {
        let s = score(o, i);
        let sound = (0.0..=1.0).contains(&s.gc) && (s.sr < 1.0 || s.gc == 1.0) && s.tlw_sr <= s.sr + 1e-9 && s.tlw_gc <= s.gc + 1e-9;
        if !sound {
            violations += 1;
            eprintln!("{}: metric invariant violated: {s:?}", i.instance_id);
        }
        rows.push(record! {
            "instance" => i.instance_id,
            "sr" => s.sr,
            "gc" => s.gc,
            "tlw_sr" => s.tlw_sr,
            "tlw_gc" => s.tlw_gc,
            "predicted" => o.predicted_actions.len(),
            "reference" => i.reference_actions.len(),
            "failed" => o.failed_actions,
            "halt" => halt_name(o),
        });
        scores.push(s);
    }
    let m = macro_average(&scores);
    io::emit(
        cfg.format,
        &rows,
        record! {
            "instances" => scores.len(),
            "sr" => m.sr,
            "gc" => m.gc,
            "tlw_sr" => m.tlw_sr,
            "tlw_gc" => m.tlw_gc,
            "violations" => violations,
        },
    );
    Ok(violations == 0)
}

pub fn stats(cfg: &Config, paths: &[PathBuf]) -> Result<bool> {
    let sessions: Vec<_> = io::load_sessions(paths)?.into_iter().map(|(_, s)| s).collect();
    let table = session_stats(&sessions);
    let rows: Vec<_> = table
        .iter()
        .map(|r| {
            let cell = |m: &teach_core::harness::MeanSd| match cfg.format {
                crate::Format::Table => serde_json::json!(m.to_string()),
                crate::Format::Record => serde_json::json!({ "mean": m.mean, "sd": m.sd }),
            };
            record! {
                "task" => r.task,
                "sessions" => r.sessions,
                "utterances" => cell(&r.utterances),
                "follower_actions" => cell(&r.follower_actions),
                "all_actions" => cell(&r.all_actions),
            }
        })
        .collect();
    io::emit(cfg.format, &rows, record! { "sessions" => sessions.len(), "tasks" => table.len() });
    Ok(true)
}
