//! Success rate, goal-condition success and their trajectory-length-weighted
//! variants, macro-averaged over instances.

use serde::{Deserialize, Serialize};

use super::inference::EvalOutcome;
use super::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub sr: f64,
    pub gc: f64,
    pub tlw_sr: f64,
    pub tlw_gc: f64,
}

/// m · |reference| / max(|reference|, |predicted|)
pub fn trajectory_weight(m: f64, reference_len: usize, predicted_len: usize) -> f64 {
    let denom = reference_len.max(predicted_len);
    if denom == 0 {
        return m;
    }
    m * reference_len as f64 / denom as f64
}

pub fn score(outcome: &EvalOutcome, instance: &Instance) -> Scores {
    let expected = &instance.expected_deltas;
    let hit = expected.intersection(&outcome.achieved_deltas).count();
    let sr = if hit == expected.len() { 1.0 } else { 0.0 };
    let gc = if expected.is_empty() { 1.0 } else { hit as f64 / expected.len() as f64 };
    let (r, p) = (instance.reference_actions.len(), outcome.predicted_actions.len());
    Scores {
        sr,
        gc,
        tlw_sr: trajectory_weight(sr, r, p),
        tlw_gc: trajectory_weight(gc, r, p),
    }
}

/// Unweighted mean over instances; zeros for an empty slice.
pub fn macro_average(scores: &[Scores]) -> Scores {
    if scores.is_empty() {
        return Scores::default();
    }
    let n = scores.len() as f64;
    let sum = scores.iter().fold(Scores::default(), |a, s| Scores {
        sr: a.sr + s.sr,
        gc: a.gc + s.gc,
        tlw_sr: a.tlw_sr + s.tlw_sr,
        tlw_gc: a.tlw_gc + s.tlw_gc,
    });
    Scores {
        sr: sum.sr / n,
        gc: sum.gc / n,
        tlw_sr: sum.tlw_sr / n,
        tlw_gc: sum.tlw_gc / n,
    }
}
