//! Shortest motion sequences over (cell, heading, pitch).

use std::collections::{HashMap, VecDeque};

use crate::sim::{project, Motion, SimConfig};
use crate::world::{Pose, WorldState, PITCH_LIMIT, PITCH_STEP};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("no pose faces {0}")]
    Unreachable(String),
}

const EXPANSION: [Motion; 8] = [
    Motion::Forward,
    Motion::Backward,
    Motion::StrafeLeft,
    Motion::StrafeRight,
    Motion::TurnLeft,
    Motion::TurnRight,
    Motion::LookUp,
    Motion::LookDown,
];

fn apply(world: &WorldState, pose: Pose, m: Motion) -> Option<Pose> {
    let mut p = pose;
    let (fx, fy) = p.heading.delta();
    let (rx, ry) = p.heading.right().delta();
    let cell = match m {
        Motion::Forward => p.cell.offset(fx, fy),
        Motion::Backward => p.cell.offset(-fx, -fy),
        Motion::StrafeRight => p.cell.offset(rx, ry),
        Motion::StrafeLeft => p.cell.offset(-rx, -ry),
        Motion::TurnLeft => {
            p.heading = p.heading.left();
            return Some(p);
        }
        Motion::TurnRight => {
            p.heading = p.heading.right();
            return Some(p);
        }
        Motion::LookUp | Motion::LookDown => {
            let d = if m == Motion::LookUp { PITCH_STEP } else { -PITCH_STEP };
            if (p.pitch + d).abs() > PITCH_LIMIT {
                return None;
            }
            p.pitch += d;
            return Some(p);
        }
    };
    if !world.is_passable(cell) {
        return None;
    }
    p.cell = cell;
    Some(p)
}

/// Pose after executing `motions` from `start`, skipping blocked moves.
pub fn simulate_motions(world: &WorldState, start: Pose, motions: &[Motion]) -> Pose {
    motions.iter().fold(start, |p, m| apply(world, p, *m).unwrap_or(p))
}

/// True when `pose` squarely faces the target's fixture and can see the
/// target (or its closed container).
pub fn is_goal(world: &WorldState, pose: &Pose, target: &str, config: &SimConfig) -> bool {
    let Some(cell) = world.cell_of(target) else {
        return false;
    };
    if pose.relative(cell) != (1, 0) {
        return false;
    }
    let shown = match world.closed_ancestor(target) {
        Some(closed) => closed,
        None => target.to_string(),
    };
    project(world, pose, &shown, config).is_some()
}

/// Breadth-first motion plan from the Follower's pose to a pose facing
/// `target`. A held target needs no motion.
pub fn plan_path(world: &WorldState, target: &str, config: &SimConfig) -> Result<Vec<Motion>, PlanError> {
    plan_path_from(world, world.follower, target, config)
}

pub fn plan_path_from(world: &WorldState, start: Pose, target: &str, config: &SimConfig) -> Result<Vec<Motion>, PlanError> {
    if world.object(target).is_none() {
        return Err(PlanError::UnknownObject(target.to_string()));
    }
    if world.in_hand(target) || is_goal(world, &start, target, config) {
        return Ok(Vec::new());
    }
    let mut parent: HashMap<Pose, (Pose, Motion)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, (start, Motion::Forward));
    while let Some(pose) = queue.pop_front() {
        for m in EXPANSION {
            let Some(next) = apply(world, pose, m) else { continue };
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next, (pose, m));
            if is_goal(world, &next, target, config) {
                let mut path = Vec::new();
                let mut cur = next;
                while cur != start {
                    let (prev, mv) = parent[&cur];
                    path.push(mv);
                    cur = prev;
                }
                path.reverse();
                return Ok(path);
            }
            queue.push_back(next);
        }
    }
    Err(PlanError::Unreachable(target.to_string()))
}

/// Number of motions needed to face `target`, if it can be faced at all.
pub fn path_len(world: &WorldState, target: &str, config: &SimConfig) -> Option<usize> {
    plan_path(world, target, config).ok().map(|p| p.len())
}
