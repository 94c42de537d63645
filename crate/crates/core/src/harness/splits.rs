//! Train / seen / unseen folds with no floorplan shared between training and
//! the unseen folds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloorplanAssignment {
    pub train_pool: BTreeSet<String>,
    pub unseen_pool: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProportions {
    /// Shares of train-pool sessions held out as seen validation and test.
    pub val_seen: f64,
    pub test_seen: f64,
    /// Share of floorplans put in the unseen pool by [`default_assignment`].
    pub unseen_floorplans: f64,
}

impl Default for SplitProportions {
    fn default() -> Self {
        SplitProportions {
            val_seen: 0.1,
            test_seen: 0.1,
            unseen_floorplans: 0.4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: BTreeSet<String>,
    pub val_seen: BTreeSet<String>,
    pub val_unseen: BTreeSet<String>,
    pub test_seen: BTreeSet<String>,
    pub test_unseen: BTreeSet<String>,
    pub assignment: FloorplanAssignment,
}

impl SplitSpec {
    pub fn folds(&self) -> [(&'static str, &BTreeSet<String>); 5] {
        [
            ("train", &self.train),
            ("val_seen", &self.val_seen),
            ("val_unseen", &self.val_unseen),
            ("test_seen", &self.test_seen),
            ("test_unseen", &self.test_unseen),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("floorplan {0} is in both pools")]
    Overlap(String),
    #[error("floorplan {0} of session {1} is in neither pool")]
    Unassigned(String, String),
    #[error("need at least two unseen floorplans and one training floorplan")]
    TooFewFloorplans,
}

/// Random floorplan partition with the configured unseen share.
pub fn default_assignment(floorplans: &BTreeSet<String>, proportions: &SplitProportions, seed: u64) -> FloorplanAssignment {
    let mut all: Vec<&String> = floorplans.iter().collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let unseen = ((all.len() as f64 * proportions.unseen_floorplans).round() as usize).min(all.len());
    FloorplanAssignment {
        unseen_pool: all[..unseen].iter().map(|s| s.to_string()).collect(),
        train_pool: all[unseen..].iter().map(|s| s.to_string()).collect(),
    }
}

/// `sessions` pairs each session id with its floorplan id.
pub fn make_splits(
    sessions: &[(String, String)],
    assignment: &FloorplanAssignment,
    proportions: &SplitProportions,
    seed: u64,
) -> Result<SplitSpec, SplitError> {
    if let Some(fp) = assignment.train_pool.intersection(&assignment.unseen_pool).next() {
        return Err(SplitError::Overlap(fp.clone()));
    }
    let mut seen: Vec<&String> = Vec::new();
    let mut unseen_by_plan: BTreeMap<&String, Vec<&String>> = BTreeMap::new();
    for (sid, fp) in sessions {
        if assignment.train_pool.contains(fp) {
            seen.push(sid);
        } else if assignment.unseen_pool.contains(fp) {
            unseen_by_plan.entry(fp).or_default().push(sid);
        } else {
            return Err(SplitError::Unassigned(fp.clone(), sid.clone()));
        }
    }
    if assignment.unseen_pool.len() < 2 || assignment.train_pool.is_empty() {
        return Err(SplitError::TooFewFloorplans);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    seen.sort();
    seen.shuffle(&mut rng);
    let n_val = (seen.len() as f64 * proportions.val_seen).round() as usize;
    let n_test = ((seen.len() as f64 * proportions.test_seen).round() as usize).min(seen.len() - n_val.min(seen.len()));
    let n_val = n_val.min(seen.len());
    let own = |v: &[&String]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();

    let mut plans: Vec<&String> = assignment.unseen_pool.iter().collect();
    plans.shuffle(&mut rng);
    let half = plans.len() / 2;
    let collect = |ps: &[&String]| -> BTreeSet<String> {
        ps.iter()
            .flat_map(|p| unseen_by_plan.get(p).into_iter().flatten())
            .map(|s| s.to_string())
            .collect()
    };
    Ok(SplitSpec {
        val_seen: own(&seen[..n_val]),
        test_seen: own(&seen[n_val..n_val + n_test]),
        train: own(&seen[n_val + n_test..]),
        val_unseen: collect(&plans[..half]),
        test_unseen: collect(&plans[half..]),
        assignment: assignment.clone(),
    })
}
