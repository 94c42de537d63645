//! Per-task corpus statistics: sessions, utterances and action counts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::Session;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        if values.is_empty() {
            return MeanSd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanSd { mean, sd: var.sqrt() }
    }
}

impl fmt::Display for MeanSd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}±{:.2}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub task: String,
    pub sessions: usize,
    pub utterances: MeanSd,
    pub follower_actions: MeanSd,
    pub all_actions: MeanSd,
}

/// One row per task name, ordered by name.
pub fn session_stats(sessions: &[Session]) -> Vec<StatsRow> {
    let mut by_task: BTreeMap<&str, Vec<&Session>> = BTreeMap::new();
    for s in sessions {
        by_task.entry(&s.task_name).or_default().push(s);
    }
    by_task
        .into_iter()
        .map(|(task, ss)| {
            let col = |f: &dyn Fn(&Session) -> usize| MeanSd::of(&ss.iter().map(|s| f(s) as f64).collect::<Vec<_>>());
            StatsRow {
                task: task.to_string(),
                sessions: ss.len(),
                utterances: col(&|s| s.utterance_count()),
                follower_actions: col(&|s| s.follower_env_actions().count()),
                all_actions: col(&|s| s.actions.len()),
            }
        })
        .collect()
}
