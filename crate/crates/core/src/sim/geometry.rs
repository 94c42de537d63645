//! Egocentric visibility and the normalized image-plane projection used by
//! coordinate selectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActionResult, ObjectSelector, Role, SimConfig, SimError};
use crate::world::{Cell, PropValue, Pose, Property, WorldState};

const EYE_HEIGHT_CM: f64 = 150.0;
const VERTICAL_SCALE: f64 = 0.3;
const PITCH_SHIFT: f64 = 0.25;
const ROW_WIDTH: usize = 4;

const OBSERVED: [Property; 8] = [
    Property::IsOpen,
    Property::IsToggled,
    Property::IsDirty,
    Property::IsCooked,
    Property::IsBoiled,
    Property::IsFilledWithLiquid,
    Property::IsFilledWithCoffee,
    Property::ParentReceptacles,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub object_id: String,
    pub object_type: String,
    /// Normalized image coordinates; absent for the held object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Grid distance along the view axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<i32>,
    pub properties: BTreeMap<Property, PropValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub actor: Role,
    pub pose: Pose,
    pub held_object: Option<VisibleObject>,
    pub visible: Vec<VisibleObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_result: Option<ActionResult>,
}

/// (forward, lateral) of a cell inside the view frustum with a clear line of sight.
fn cell_in_view(world: &WorldState, pose: &Pose, cell: Cell, depth: i32) -> Option<(i32, i32)> {
    let (f, l) = pose.relative(cell);
    if f < 1 || f > depth || l.abs() > f {
        return None;
    }
    let (fx, fy) = pose.heading.delta();
    let (rx, ry) = pose.heading.right().delta();
    for t in 1..f {
        let lat = (l as f64 * t as f64 / f as f64).round() as i32;
        let c = pose.cell.offset(fx * t + rx * lat, fy * t + ry * lat);
        if c == cell {
            continue;
        }
        if !world.is_passable(c) {
            return None;
        }
    }
    Some((f, l))
}

fn fixture_point(world: &WorldState, pose: &Pose, fixture: &str, f: i32, l: i32) -> (f64, f64) {
    let elevation = world
        .object(fixture)
        .and_then(|o| o.info())
        .map(|i| i.elevation_cm as f64)
        .unwrap_or(0.0);
    let x = 0.5 + l as f64 / (2 * f + 1) as f64;
    let y = 0.5 + (EYE_HEIGHT_CM - elevation) / 100.0 * VERTICAL_SCALE / f as f64 + pose.pitch as f64 / 30.0 * PITCH_SHIFT;
    (x, y)
}

fn in_frame((x, y): (f64, f64)) -> bool {
    (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)
}

/// Image point of every object in view, keyed by id, with its distance.
fn projections(world: &WorldState, pose: &Pose, depth: i32) -> BTreeMap<String, (f64, f64, i32)> {
    let mut out = BTreeMap::new();
    for fixture in world.objects.values().filter(|o| o.cell.is_some()) {
        let Some((f, l)) = cell_in_view(world, pose, fixture.cell.expect("fixture cell"), depth) else {
            continue;
        };
        let (fx, fy) = fixture_point(world, pose, &fixture.object_id, f, l);
        if in_frame((fx, fy + 0.03)) {
            out.insert(fixture.object_id.clone(), (fx, fy + 0.03, f));
        }
        let items = world.descendants(&fixture.object_id);
        let spacing = 1.0 / (2 * f + 1) as f64 / 5.0;
        for (k, id) in items.iter().enumerate() {
            if world.closed_ancestor(id).is_some() {
                continue;
            }
            let row = k / ROW_WIDTH;
            let col = k % ROW_WIDTH;
            let in_row = (items.len() - row * ROW_WIDTH).min(ROW_WIDTH);
            let x = fx + (col as f64 - (in_row as f64 - 1.0) / 2.0) * spacing;
            let y = fy - 0.06 - 0.035 * row as f64;
            if in_frame((x, y)) {
                out.insert(id.clone(), (x, y, f));
            }
        }
    }
    out
}

/// Normalized image point of `id` from `pose`, if visible.
pub fn project(world: &WorldState, pose: &Pose, id: &str, config: &SimConfig) -> Option<(f64, f64)> {
    projections(world, pose, config.view_depth).get(id).map(|(x, y, _)| (*x, *y))
}

fn describe(world: &WorldState, id: &str, at: Option<(f64, f64, i32)>) -> VisibleObject {
    let obj = &world.objects[id];
    VisibleObject {
        object_id: id.to_string(),
        object_type: obj.object_type().to_string(),
        x: at.map(|a| a.0),
        y: at.map(|a| a.1),
        distance: at.map(|a| a.2),
        properties: OBSERVED
            .iter()
            .filter_map(|p| obj.get(*p).map(|v| (*p, v.clone())))
            .collect(),
    }
}

pub fn visible_objects(world: &WorldState, pose: &Pose, config: &SimConfig) -> Vec<VisibleObject> {
    projections(world, pose, config.view_depth)
        .into_iter()
        .map(|(id, at)| describe(world, &id, Some(at)))
        .collect()
}

/// Interactions need the target's fixture in an adjacent forward cell.
pub fn reachable(world: &WorldState, pose: &Pose, id: &str) -> bool {
    match world.cell_of(id) {
        Some(c) => {
            let (f, l) = pose.relative(c);
            f == 1 && l.abs() <= 1
        }
        None => false,
    }
}

pub fn resolve_selector(world: &WorldState, pose: &Pose, sel: &ObjectSelector, config: &SimConfig) -> Result<String, SimError> {
    let seen = projections(world, pose, config.view_depth);
    match sel {
        ObjectSelector::ObjectId(id) => {
            if world.object(id).is_none() {
                return Err(SimError::UnknownObject(id.clone()));
            }
            if seen.contains_key(id) || world.in_hand(id) {
                return Ok(id.clone());
            }
            if let Some(closed) = world.closed_ancestor(id) {
                return Err(SimError::ClosedParent(id.clone(), closed));
            }
            Err(SimError::NotVisible(id.clone()))
        }
        ObjectSelector::Coordinate(x, y) => {
            let tol = config.selector_tolerance;
            seen.iter()
                .filter(|(_, (px, py, _))| (px - x).abs() <= tol && (py - y).abs() <= tol)
                .map(|(id, (px, py, d))| ((px - x).hypot(py - y), *d, id))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2)))
                .map(|(_, _, id)| id.clone())
                .ok_or(SimError::NothingAtCoordinate(*x, *y))
        }
    }
}

pub fn observe(world: &WorldState, actor: Role, last_result: Option<ActionResult>, config: &SimConfig) -> Observation {
    let pose = match actor {
        Role::Follower => world.follower,
        Role::Commander => Pose::new(world.commander.cell, world.commander.heading),
    };
    let held_object = match actor {
        Role::Follower => world.held_object.as_deref().map(|h| describe(world, h, None)),
        Role::Commander => None,
    };
    Observation {
        actor,
        pose,
        held_object,
        visible: visible_objects(world, &pose, config),
        last_result,
    }
}
