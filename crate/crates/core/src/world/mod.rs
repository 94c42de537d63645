//! Object instances, agent poses, containment and snapshots of the household world.

pub mod catalog;
mod diff;
mod hierarchy;
mod props;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use diff::{apply_deltas, diff_states, PropertyDelta};
pub use hierarchy::{ClassHierarchy, HierarchyError};
pub use props::{PropValue, Property, UnknownProperty};

pub const WORLD_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Self {
        Cell::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    /// Unit step in grid coordinates; y grows southwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::N => Heading::W,
            Heading::W => Heading::S,
            Heading::S => Heading::E,
            Heading::E => Heading::N,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }

    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];
}

/// Camera pitch in degrees; positive looks up.
pub const PITCH_STEP: i32 = 30;
pub const PITCH_LIMIT: i32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
    pub pitch: i32,
}

impl Pose {
    pub fn new(cell: Cell, heading: Heading) -> Self {
        Pose { cell, heading, pitch: 0 }
    }

    /// (forward, lateral) coordinates of `target` in this pose's frame;
    /// lateral is positive to the right.
    pub fn relative(&self, target: Cell) -> (i32, i32) {
        let dx = target.x - self.cell.x;
        let dy = target.y - self.cell.y;
        let (fx, fy) = self.heading.delta();
        let (rx, ry) = self.heading.right().delta();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }
}

/// Walls and floor of a single room. Fixtures live in [`WorldState::objects`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub width: i32,
    pub height: i32,
    /// One string per row; `#` is wall, `.` is floor.
    pub rows: Vec<String>,
}

impl Layout {
    pub fn from_rows(rows: Vec<String>) -> Self {
        let height = rows.len() as i32;
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0) as i32;
        Layout { width, height, rows }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_floor(&self, c: Cell) -> bool {
        self.in_bounds(c)
            && self.rows[c.y as usize]
                .as_bytes()
                .get(c.x as usize)
                .is_some_and(|b| *b == b'.')
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        !self.is_floor(c)
    }
}

impl Default for Layout {
    fn default() -> Self {
        Layout::from_rows(Vec::new())
    }
}

/// Render an object id in the `Type|x|y|z` style with two-decimal coordinates.
pub fn format_object_id(object_type: &str, x: f64, y: f64, z: f64) -> String {
    fn coord(v: f64) -> String {
        let sign = if v < 0.0 { '-' } else { ' ' };
        format!("{sign}{:05.2}", v.abs())
    }
    format!("{object_type}|{}|{}|{}", coord(x), coord(y), coord(z))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub object_id: String,
    /// Grid cell for fixtures; contained and held objects have none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Cell>,
    pub properties: BTreeMap<Property, PropValue>,
}

impl ObjectInstance {
    pub fn new(object_id: impl Into<String>, info: &catalog::TypeInfo) -> Self {
        ObjectInstance {
            object_id: object_id.into(),
            cell: None,
            properties: catalog::initial_properties(info),
        }
    }

    pub fn object_type(&self) -> &str {
        self.properties
            .get(&Property::ObjectType)
            .and_then(PropValue::as_str)
            .unwrap_or("")
    }

    pub fn get(&self, p: Property) -> Option<&PropValue> {
        self.properties.get(&p)
    }

    pub fn flag(&self, p: Property) -> bool {
        self.get(p).and_then(PropValue::as_int) == Some(1)
    }

    pub fn set(&mut self, p: Property, v: PropValue) {
        self.properties.insert(p, v);
    }

    pub fn parent(&self) -> Option<&str> {
        self.get(Property::ParentReceptacles).and_then(PropValue::as_str)
    }

    pub fn info(&self) -> Option<&'static catalog::TypeInfo> {
        catalog::lookup(self.object_type())
    }
}

/// Test whether one object satisfies one `property: desired` condition.
///
/// `objectType` compares literally, `objectClass` consults the hierarchy and
/// `parentReceptacles` holds when the desired id is any ancestor.
pub fn matches_condition(
    world: &WorldState,
    obj: &ObjectInstance,
    property: &str,
    desired: &PropValue,
    hierarchy: &ClassHierarchy,
) -> Result<bool, UnknownProperty> {
    let p: Property = property.parse()?;
    Ok(matches_property(world, obj, p, desired, hierarchy))
}

pub fn matches_property(
    world: &WorldState,
    obj: &ObjectInstance,
    property: Property,
    desired: &PropValue,
    hierarchy: &ClassHierarchy,
) -> bool {
    match property {
        Property::ObjectClass => match desired {
            PropValue::Str(class) => hierarchy.is_member(obj.object_type(), class),
            PropValue::Int(_) => false,
        },
        Property::ParentReceptacles => match desired {
            PropValue::Str(id) => world.ancestors(&obj.object_id).iter().any(|a| a == id),
            PropValue::Int(_) => false,
        },
        p => obj.get(p) == Some(desired),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("object `{0}` is stored under a different key")]
    KeyMismatch(String),
    #[error("object `{id}` has type `{actual}` but its id names `{prefix}`")]
    TypePrefix { id: String, prefix: String, actual: String },
    #[error("object `{0}` refers to a missing parent `{1}`")]
    MissingParent(String, String),
    #[error("object `{0}` is inside `{1}`, which is not a receptacle")]
    ParentNotReceptacle(String, String),
    #[error("containment cycle through `{0}`")]
    ContainmentCycle(String),
    #[error("held object `{0}` is missing or still placed")]
    HeldPlaced(String),
    #[error("object `{0}` has property {1} = {2}, expected 0 or 1")]
    NonBoolean(String, Property, PropValue),
    #[error("object `{0}` has neither a cell nor a parent and is not held")]
    Floating(String),
    #[error("malformed world snapshot: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CameraPose {
    pub cell: Cell,
    pub heading: Heading,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub version: u32,
    pub layout: Arc<Layout>,
    pub objects: BTreeMap<String, ObjectInstance>,
    pub follower: Pose,
    pub commander: CameraPose,
    pub held_object: Option<String>,
    pub tick: u64,
}

impl Default for WorldState {
    fn default() -> Self {
        WorldState::new(Layout::default(), Pose::new(Cell::new(0, 0), Heading::N))
    }
}

impl WorldState {
    pub fn new(layout: Layout, follower: Pose) -> Self {
        WorldState {
            version: WORLD_FORMAT_VERSION,
            layout: Arc::new(layout),
            objects: BTreeMap::new(),
            commander: CameraPose {
                cell: follower.cell,
                heading: follower.heading,
            },
            follower,
            held_object: None,
            tick: 0,
        }
    }

    pub fn insert(&mut self, obj: ObjectInstance) {
        self.objects.insert(obj.object_id.clone(), obj);
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.get(id)
    }

    pub fn object_mut(&mut self, id: &str) -> Option<&mut ObjectInstance> {
        self.objects.get_mut(id)
    }

    pub fn object_type(&self, id: &str) -> Option<&str> {
        self.object(id).map(ObjectInstance::object_type)
    }

    pub fn parent_of(&self, id: &str) -> Option<&str> {
        self.object(id).and_then(ObjectInstance::parent)
    }

    /// Containing receptacles from the innermost outwards.
    pub fn ancestors(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = self.parent_of(id);
        while let Some(p) = cur {
            if out.iter().any(|a| a == p) || out.len() > self.objects.len() {
                break;
            }
            out.push(p.to_string());
            cur = self.parent_of(p);
        }
        out
    }

    /// Direct contents of a receptacle, ordered by id.
    pub fn children(&self, id: &str) -> Vec<&str> {
        self.objects
            .values()
            .filter(|o| o.parent() == Some(id))
            .map(|o| o.object_id.as_str())
            .collect()
    }

    /// All objects transitively inside `id`, depth first with children by id.
    pub fn descendants(&self, id: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack: Vec<String> = self.children(id).into_iter().rev().map(String::from).collect();
        while let Some(c) = stack.pop() {
            stack.extend(self.children(&c).into_iter().rev().map(String::from));
            out.push(c);
        }
        out
    }

    pub fn is_held(&self, id: &str) -> bool {
        self.held_object.as_deref() == Some(id)
    }

    /// The outermost object of the containment chain (a fixture or the held object).
    pub fn root_of<'a>(&'a self, id: &'a str) -> &'a str {
        let mut cur = id;
        let mut steps = 0;
        while let Some(p) = self.parent_of(cur) {
            cur = p;
            steps += 1;
            if steps > self.objects.len() {
                break;
            }
        }
        cur
    }

    /// Grid cell an object sits in; `None` when it is in the Follower's hand.
    pub fn cell_of(&self, id: &str) -> Option<Cell> {
        let root = self.root_of(id);
        if self.is_held(root) {
            return None;
        }
        self.object(root).and_then(|o| o.cell)
    }

    /// True if the object is being carried, directly or inside the held object.
    pub fn in_hand(&self, id: &str) -> bool {
        self.is_held(self.root_of(id))
    }

    /// First closed openable ancestor, outermost first.
    pub fn closed_ancestor(&self, id: &str) -> Option<String> {
        self.ancestors(id).into_iter().rev().find(|a| {
            self.object(a)
                .is_some_and(|o| o.flag(Property::Openable) && !o.flag(Property::IsOpen))
        })
    }

    pub fn fixture_at(&self, cell: Cell) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.values().filter(move |o| o.cell == Some(cell))
    }

    pub fn is_passable(&self, cell: Cell) -> bool {
        self.layout.is_floor(cell) && self.fixture_at(cell).next().is_none()
    }

    pub fn objects_of_type<'a>(&'a self, object_type: &'a str) -> impl Iterator<Item = &'a ObjectInstance> + 'a {
        self.objects.values().filter(move |o| o.object_type() == object_type)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        for (key, obj) in &self.objects {
            if key != &obj.object_id {
                return Err(WorldError::KeyMismatch(key.clone()));
            }
            let prefix = obj.object_id.split('|').next().unwrap_or("");
            if prefix != obj.object_type() {
                return Err(WorldError::TypePrefix {
                    id: obj.object_id.clone(),
                    prefix: prefix.to_string(),
                    actual: obj.object_type().to_string(),
                });
            }
            for (p, v) in &obj.properties {
                if p.is_boolean() && !matches!(v, PropValue::Int(0) | PropValue::Int(1)) {
                    return Err(WorldError::NonBoolean(obj.object_id.clone(), *p, v.clone()));
                }
            }
            if let Some(parent) = obj.parent() {
                let Some(p) = self.object(parent) else {
                    return Err(WorldError::MissingParent(obj.object_id.clone(), parent.to_string()));
                };
                if !p.flag(Property::Receptacle) {
                    return Err(WorldError::ParentNotReceptacle(obj.object_id.clone(), parent.to_string()));
                }
            } else if obj.cell.is_none() && !self.is_held(&obj.object_id) {
                return Err(WorldError::Floating(obj.object_id.clone()));
            }
            // cycle check: walking parents must terminate
            let mut seen = vec![obj.object_id.as_str()];
            let mut cur = obj.parent();
            while let Some(p) = cur {
                if seen.contains(&p) {
                    return Err(WorldError::ContainmentCycle(obj.object_id.clone()));
                }
                seen.push(p);
                cur = self.parent_of(p);
            }
        }
        if let Some(h) = &self.held_object {
            match self.object(h) {
                Some(o) if o.parent().is_none() && o.cell.is_none() => {}
                _ => return Err(WorldError::HeldPlaced(h.clone())),
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let w: WorldState = serde_json::from_str(text).map_err(|e| WorldError::Format(e.to_string()))?;
        if w.version != WORLD_FORMAT_VERSION {
            return Err(WorldError::Format(format!("unsupported version {}", w.version)));
        }
        Ok(w)
    }

    /// SHA-256 over the canonical serialization, hex encoded.
    pub fn state_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
