//! Deterministic grid-world simulator for the two-agent action space.

mod floorplan;
mod geometry;
mod rules;
mod scenario;
mod session;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::world::{catalog, format_object_id, Cell, PropValue, Property, WorldState, PITCH_LIMIT, PITCH_STEP};

pub use floorplan::{Floorplan, FloorplanError, FixturePlacement, RoomType, FLOORPLAN_FORMAT_VERSION};
pub use geometry::{observe, project, reachable, resolve_selector, visible_objects, Observation, VisibleObject};
pub use rules::{apply_transition_rules, RuleError, RuleSet, TransitionRule};
pub use scenario::{generate_scenario, Scenario, ScenarioError, MAX_SCENARIO_RETRIES, SCENARIO_FORMAT_VERSION};
pub use session::{replay, search_object, ActionRecord, Clock, Divergence, SearchHit, Session, SessionFormatError, SESSION_FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Commander,
    Follower,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Commander => "commander",
            Role::Follower => "follower",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Motion {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
    StrafeLeft,
    StrafeRight,
}

impl Motion {
    pub const ALL: [Motion; 8] = [
        Motion::Forward,
        Motion::Backward,
        Motion::TurnLeft,
        Motion::TurnRight,
        Motion::LookUp,
        Motion::LookDown,
        Motion::StrafeLeft,
        Motion::StrafeRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Motion::Forward => "Forward",
            Motion::Backward => "Backward",
            Motion::TurnLeft => "TurnLeft",
            Motion::TurnRight => "TurnRight",
            Motion::LookUp => "LookUp",
            Motion::LookDown => "LookDown",
            Motion::StrafeLeft => "StrafeLeft",
            Motion::StrafeRight => "StrafeRight",
        }
    }

    pub fn parse(s: &str) -> Option<Motion> {
        Motion::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verb {
    Pickup,
    Place,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
    Pour,
}

impl Verb {
    pub const ALL: [Verb; 8] = [
        Verb::Pickup,
        Verb::Place,
        Verb::Open,
        Verb::Close,
        Verb::ToggleOn,
        Verb::ToggleOff,
        Verb::Slice,
        Verb::Pour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verb::Pickup => "Pickup",
            Verb::Place => "Place",
            Verb::Open => "Open",
            Verb::Close => "Close",
            Verb::ToggleOn => "ToggleOn",
            Verb::ToggleOff => "ToggleOff",
            Verb::Slice => "Slice",
            Verb::Pour => "Pour",
        }
    }

    pub fn parse(s: &str) -> Option<Verb> {
        Verb::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// How an interaction names its target: directly, or by a point in the
/// actor's normalized egocentric view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectSelector {
    ObjectId(String),
    Coordinate(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Utterance { text: String },
    Motion { motion: Motion },
    Interact { verb: Verb, target: ObjectSelector },
    ProgressCheck,
    SearchObject { query: String },
    /// Commander free-camera motion.
    Camera { motion: Motion },
    Stop,
}

impl Action {
    pub fn is_dialogue(&self) -> bool {
        matches!(self, Action::Utterance { .. })
    }

    /// Actions that may change the world.
    pub fn is_environment(&self) -> bool {
        matches!(self, Action::Motion { .. } | Action::Interact { .. } | Action::Camera { .. })
    }

    pub fn is_interaction(&self) -> bool {
        matches!(self, Action::Interact { .. })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("blocked by a wall or fixture")]
    Collision,
    #[error("camera cannot tilt further")]
    CameraLimit,
    #[error("{0} may not perform this action")]
    RoleViolation(Role),
    #[error("no object `{0}`")]
    UnknownObject(String),
    #[error("nothing visible near ({0:.2}, {1:.2})")]
    NothingAtCoordinate(f64, f64),
    #[error("`{0}` is not visible")]
    NotVisible(String),
    #[error("`{0}` is out of reach")]
    OutOfReach(String),
    #[error("`{0}` is inside closed `{1}`")]
    ClosedParent(String, String),
    #[error("hand already holds `{0}`")]
    HandOccupied(String),
    #[error("hand is empty")]
    HandEmpty,
    #[error("`{0}` cannot be picked up")]
    NotPickupable(String),
    #[error("`{0}` is not a receptacle")]
    NotReceptacle(String),
    #[error("`{0}` does not accept `{1}`")]
    WrongReceptacle(String, String),
    #[error("`{0}` is full")]
    ReceptacleFull(String),
    #[error("`{0}` cannot be opened or closed")]
    NotOpenable(String),
    #[error("`{0}` cannot be toggled")]
    NotToggleable(String),
    #[error("`{0}` cannot be sliced")]
    NotSliceable(String),
    #[error("slicing needs a knife in hand")]
    NoKnifeHeld,
    #[error("`{0}` is already in that state")]
    AlreadyInState(String),
    #[error("`{0}` must be turned off first")]
    ApplianceRunning(String),
    #[error("held `{0}` contains nothing to pour")]
    NothingToPour(String),
    #[error("`{0}` cannot hold liquid")]
    NotFillable(String),
}

impl SimError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SimError::Collision => "collision",
            SimError::CameraLimit => "camera-limit",
            SimError::RoleViolation(_) => "role-violation",
            SimError::UnknownObject(_) => "unknown-object",
            SimError::NothingAtCoordinate(..) => "target-not-found",
            SimError::NotVisible(_) => "target-not-visible",
            SimError::OutOfReach(_) => "out-of-reach",
            SimError::ClosedParent(..) => "closed-parent",
            SimError::HandOccupied(_) => "hand-occupied",
            SimError::HandEmpty => "hand-empty",
            SimError::NotPickupable(_) => "not-pickupable",
            SimError::NotReceptacle(_) => "not-receptacle",
            SimError::WrongReceptacle(..) => "wrong-receptacle",
            SimError::ReceptacleFull(_) => "receptacle-full",
            SimError::NotOpenable(_) => "target-not-openable",
            SimError::NotToggleable(_) => "target-not-toggleable",
            SimError::NotSliceable(_) => "target-not-sliceable",
            SimError::NoKnifeHeld => "no-knife-held",
            SimError::AlreadyInState(_) => "already-in-state",
            SimError::ApplianceRunning(_) => "appliance-running",
            SimError::NothingToPour(_) => "nothing-to-pour",
            SimError::NotFillable(_) => "target-not-fillable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionResult {
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Object the selector resolved to, for interactions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl ActionResult {
    pub fn ok(target: Option<String>) -> Self {
        ActionResult {
            success: true,
            error: None,
            message: None,
            target,
        }
    }

    pub fn failed(e: &SimError) -> Self {
        ActionResult {
            success: false,
            error: Some(e.code().to_string()),
            message: Some(e.to_string()),
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slice_count: usize,
    pub selector_tolerance: f64,
    pub view_depth: i32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            slice_count: 4,
            selector_tolerance: 0.05,
            view_depth: 3,
        }
    }
}

/// Simulator configuration plus the transition rule set.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub config: SimConfig,
    pub rules: RuleSet,
}

impl Default for Simulator {
    fn default() -> Self {
        Simulator::new(SimConfig::default())
    }
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Simulator {
            config,
            rules: RuleSet::shipped(),
        }
    }

    /// Execute one action. Failures leave `world` untouched.
    pub fn step(&self, world: &WorldState, action: &Action, actor: Role) -> (WorldState, ActionResult) {
        match self.try_step(world, action, actor) {
            Ok((mut next, target)) => {
                if action.is_environment() {
                    self.rules.run(&mut next);
                    next.tick += 1;
                }
                debug_assert!(next.validate().is_ok(), "{:?}", next.validate());
                (next, ActionResult::ok(target))
            }
            Err(e) => (world.clone(), ActionResult::failed(&e)),
        }
    }

    fn try_step(&self, world: &WorldState, action: &Action, actor: Role) -> Result<(WorldState, Option<String>), SimError> {
        let authorized = match action {
            Action::Motion { .. } | Action::Interact { .. } => actor == Role::Follower,
            Action::ProgressCheck | Action::SearchObject { .. } | Action::Camera { .. } => actor == Role::Commander,
            Action::Utterance { .. } | Action::Stop => true,
        };
        if !authorized {
            return Err(SimError::RoleViolation(actor));
        }
        let mut next = world.clone();
        match action {
            Action::Motion { motion } => {
                move_follower(&mut next, *motion)?;
                Ok((next, None))
            }
            Action::Camera { motion } => {
                move_camera(&mut next, *motion)?;
                Ok((next, None))
            }
            Action::Interact { verb, target } => {
                let id = resolve_selector(world, &world.follower, target, &self.config)?;
                self.interact(&mut next, *verb, &id)?;
                Ok((next, Some(id)))
            }
            _ => Ok((next, None)),
        }
    }

    fn interact(&self, w: &mut WorldState, verb: Verb, id: &str) -> Result<(), SimError> {
        if let Some(closed) = w.closed_ancestor(id) {
            return Err(SimError::ClosedParent(id.to_string(), closed));
        }
        if w.in_hand(id) {
            if verb == Verb::Pickup {
                return Err(SimError::HandOccupied(w.held_object.clone().unwrap_or_default()));
            }
            return Err(SimError::NotVisible(id.to_string()));
        }
        if !reachable(w, &w.follower, id) {
            return Err(SimError::OutOfReach(id.to_string()));
        }
        let obj = w.object(id).ok_or_else(|| SimError::UnknownObject(id.to_string()))?;
        let info = obj.info().ok_or_else(|| SimError::UnknownObject(id.to_string()))?;
        match verb {
            Verb::Pickup => {
                if let Some(h) = &w.held_object {
                    return Err(SimError::HandOccupied(h.clone()));
                }
                if !info.pickupable {
                    return Err(SimError::NotPickupable(id.to_string()));
                }
                let o = w.object_mut(id).expect("checked");
                o.properties.remove(&Property::ParentReceptacles);
                w.held_object = Some(id.to_string());
            }
            Verb::Place => {
                let held = w.held_object.clone().ok_or(SimError::HandEmpty)?;
                if !obj.flag(Property::Receptacle) {
                    return Err(SimError::NotReceptacle(id.to_string()));
                }
                if info.openable && !obj.flag(Property::IsOpen) {
                    return Err(SimError::ClosedParent(held, id.to_string()));
                }
                let held_type = w.object_type(&held).unwrap_or("").to_string();
                let accepted = match info.accepts {
                    catalog::Accepts::Anything => true,
                    catalog::Accepts::BreadSlices => held_type == "BreadSliced",
                    catalog::Accepts::Drinkware => matches!(held_type.as_str(), "Mug" | "Cup"),
                    catalog::Accepts::Cookware => matches!(held_type.as_str(), "Pot" | "Pan"),
                    catalog::Accepts::Nothing => false,
                };
                let nested_dish = !info.fixture && catalog::lookup(&held_type).is_some_and(|h| h.receptacle);
                if !accepted || nested_dish {
                    return Err(SimError::WrongReceptacle(id.to_string(), held_type));
                }
                if w.children(id).len() >= info.capacity {
                    return Err(SimError::ReceptacleFull(id.to_string()));
                }
                w.held_object = None;
                w.object_mut(&held)
                    .expect("held object exists")
                    .set(Property::ParentReceptacles, PropValue::str(id));
            }
            Verb::Open | Verb::Close => {
                if !info.openable {
                    return Err(SimError::NotOpenable(id.to_string()));
                }
                let want = verb == Verb::Open;
                if obj.flag(Property::IsOpen) == want {
                    return Err(SimError::AlreadyInState(id.to_string()));
                }
                if want && obj.flag(Property::IsToggled) {
                    return Err(SimError::ApplianceRunning(id.to_string()));
                }
                w.object_mut(id).expect("checked").set(Property::IsOpen, PropValue::flag(want));
            }
            Verb::ToggleOn | Verb::ToggleOff => {
                if !info.toggleable {
                    return Err(SimError::NotToggleable(id.to_string()));
                }
                let want = verb == Verb::ToggleOn;
                if obj.flag(Property::IsToggled) == want {
                    return Err(SimError::AlreadyInState(id.to_string()));
                }
                w.object_mut(id).expect("checked").set(Property::IsToggled, PropValue::flag(want));
            }
            Verb::Slice => {
                if !info.sliceable {
                    return Err(SimError::NotSliceable(id.to_string()));
                }
                let holds_knife = w
                    .held_object
                    .as_deref()
                    .and_then(|h| w.object_type(h))
                    .is_some_and(catalog::is_knife);
                if !holds_knife {
                    return Err(SimError::NoKnifeHeld);
                }
                self.slice(w, id);
            }
            Verb::Pour => {
                let held = w.held_object.clone().ok_or(SimError::HandEmpty)?;
                let source = w.object(&held).expect("held object exists");
                let has_water = source.flag(Property::IsFilledWithLiquid);
                let has_coffee = source.flag(Property::IsFilledWithCoffee);
                if !has_water && !has_coffee {
                    return Err(SimError::NothingToPour(held));
                }
                if !info.fillable {
                    return Err(SimError::NotFillable(id.to_string()));
                }
                let target = w.object_mut(id).expect("checked");
                target.set(Property::IsFilledWithLiquid, PropValue::Int(1));
                if has_coffee && info.holds_coffee {
                    target.set(Property::IsFilledWithCoffee, PropValue::Int(1));
                }
                let source = w.object_mut(&held).expect("held object exists");
                source.set(Property::IsFilledWithLiquid, PropValue::Int(0));
                if has_coffee {
                    source.set(Property::IsFilledWithCoffee, PropValue::Int(0));
                }
            }
        }
        Ok(())
    }

    fn slice(&self, w: &mut WorldState, id: &str) {
        let source = w.objects.remove(id).expect("slice target exists");
        let sliced = catalog::sliced_type(source.object_type()).expect("sliceable type");
        let info = catalog::lookup(&sliced).expect("sliced type in catalog");
        let coords: Vec<f64> = id.split('|').skip(1).filter_map(|c| c.trim().parse().ok()).collect();
        let (x, y, z) = match coords[..] {
            [x, y, z] => (x, y, z),
            _ => (0.0, 0.0, 0.0),
        };
        for k in 0..self.config.slice_count {
            let mut n = 0;
            let mut slice_id = format_object_id(&sliced, x, y + 0.01 * (k + 1) as f64, z);
            while w.objects.contains_key(&slice_id) {
                n += 1;
                slice_id = format_object_id(&sliced, x + 0.001 * n as f64, y + 0.01 * (k + 1) as f64, z);
            }
            let mut o = crate::world::ObjectInstance::new(slice_id, info);
            if let Some(p) = source.get(Property::ParentReceptacles) {
                o.set(Property::ParentReceptacles, p.clone());
            }
            for p in [Property::IsCooked, Property::IsBoiled] {
                if let (Some(v), true) = (source.get(p), o.properties.contains_key(&p)) {
                    o.set(p, v.clone());
                }
            }
            w.insert(o);
        }
    }
}

fn move_follower(w: &mut WorldState, m: Motion) -> Result<(), SimError> {
    let pose = &mut w.follower;
    let (fx, fy) = pose.heading.delta();
    let (rx, ry) = pose.heading.right().delta();
    let target = match m {
        Motion::Forward => pose.cell.offset(fx, fy),
        Motion::Backward => pose.cell.offset(-fx, -fy),
        Motion::StrafeRight => pose.cell.offset(rx, ry),
        Motion::StrafeLeft => pose.cell.offset(-rx, -ry),
        Motion::TurnLeft => {
            pose.heading = pose.heading.left();
            return Ok(());
        }
        Motion::TurnRight => {
            pose.heading = pose.heading.right();
            return Ok(());
        }
        Motion::LookUp | Motion::LookDown => {
            let delta = if m == Motion::LookUp { PITCH_STEP } else { -PITCH_STEP };
            if (pose.pitch + delta).abs() > PITCH_LIMIT {
                return Err(SimError::CameraLimit);
            }
            pose.pitch += delta;
            return Ok(());
        }
    };
    if !w.is_passable(target) {
        return Err(SimError::Collision);
    }
    w.follower.cell = target;
    Ok(())
}

/// The Commander camera passes through fixtures but stays inside the room.
fn move_camera(w: &mut WorldState, m: Motion) -> Result<(), SimError> {
    let cam = &mut w.commander;
    let (fx, fy) = cam.heading.delta();
    let (rx, ry) = cam.heading.right().delta();
    let target: Cell = match m {
        Motion::Forward => cam.cell.offset(fx, fy),
        Motion::Backward => cam.cell.offset(-fx, -fy),
        Motion::StrafeRight => cam.cell.offset(rx, ry),
        Motion::StrafeLeft => cam.cell.offset(-rx, -ry),
        Motion::TurnLeft => {
            cam.heading = cam.heading.left();
            return Ok(());
        }
        Motion::TurnRight => {
            cam.heading = cam.heading.right();
            return Ok(());
        }
        Motion::LookUp | Motion::LookDown => return Err(SimError::CameraLimit),
    };
    if !w.layout.is_floor(target) {
        return Err(SimError::Collision);
    }
    w.commander.cell = target;
    Ok(())
}

/// [`Simulator::step`] with default configuration and rules.
pub fn step(world: &WorldState, action: &Action, actor: Role) -> (WorldState, ActionResult) {
    Simulator::default().step(world, action, actor)
}
