//! Single-room floorplans: a wall/floor grid plus immovable fixtures.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::world::{catalog, format_object_id, Cell, Heading, Layout, ObjectInstance, Pose, WorldState};

pub const FLOORPLAN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoomType {
    Kitchen,
    Livingroom,
    Bedroom,
    Bathroom,
}

impl RoomType {
    pub const ALL: [RoomType; 4] = [RoomType::Kitchen, RoomType::Livingroom, RoomType::Bedroom, RoomType::Bathroom];

    pub fn name(self) -> &'static str {
        match self {
            RoomType::Kitchen => "kitchen",
            RoomType::Livingroom => "livingroom",
            RoomType::Bedroom => "bedroom",
            RoomType::Bathroom => "bathroom",
        }
    }

    /// How many built-in plans exist for this room type.
    pub fn builtin_count(self) -> usize {
        match self {
            RoomType::Kitchen => 10,
            _ => 5,
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoomType {
    type Err = FloorplanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoomType::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| FloorplanError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixturePlacement {
    pub object_type: String,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Floorplan {
    pub version: u32,
    pub floorplan_id: String,
    pub room_type: RoomType,
    pub rows: Vec<String>,
    pub fixtures: Vec<FixturePlacement>,
}

#[derive(Debug, thiserror::Error)]
pub enum FloorplanError {
    #[error("no floorplan `{0}`")]
    UnknownId(String),
    #[error("floorplan {id}: {message}")]
    Invalid { id: String, message: String },
    #[error("malformed floorplan file {path}: {message}")]
    Format { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn fixture_list(room: RoomType, index: usize) -> (Vec<&'static str>, Vec<&'static str>) {
    let plant = index % 2 == 0 || room == RoomType::Livingroom;
    let (mut wall, interior): (Vec<&str>, Vec<&str>) = match room {
        RoomType::Kitchen => (
            vec![
                "CounterTop", "CounterTop", "CounterTop", "StoveBurner", "StoveBurner", "Fridge", "Cabinet", "Cabinet",
                "Drawer", "Microwave", "Toaster", "CoffeeMachine",
            ],
            vec!["DiningTable"],
        ),
        RoomType::Livingroom => (vec!["Sofa", "SideTable", "SideTable", "Shelf", "Desk"], vec!["CoffeeTable"]),
        RoomType::Bedroom => (vec!["Bed", "Desk", "Dresser", "SideTable", "SideTable", "Shelf"], vec![]),
        RoomType::Bathroom => (vec!["CounterTop", "Bathtub", "Shelf", "Cabinet"], vec![]),
    };
    if plant {
        wall.push("HousePlant");
    }
    (wall, interior)
}

fn has_sink(room: RoomType) -> bool {
    matches!(room, RoomType::Kitchen | RoomType::Bathroom)
}

fn id_seed(id: &str) -> u64 {
    id.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

impl Floorplan {
    pub fn builtin_ids() -> Vec<String> {
        RoomType::ALL
            .into_iter()
            .flat_map(|r| (0..r.builtin_count()).map(move |i| format!("{}_{i:02}", r.name())))
            .collect()
    }

    pub fn builtin_all() -> Vec<Floorplan> {
        Floorplan::builtin_ids()
            .iter()
            .map(|id| Floorplan::builtin(id).expect("listed id"))
            .collect()
    }

    /// Built-in plans are generated deterministically from their id.
    pub fn builtin(id: &str) -> Result<Floorplan, FloorplanError> {
        let unknown = || FloorplanError::UnknownId(id.to_string());
        let (room, index) = id.rsplit_once('_').ok_or_else(unknown)?;
        let room: RoomType = room.parse().map_err(|_| unknown())?;
        let index: usize = index.parse().map_err(|_| unknown())?;
        if index >= room.builtin_count() || id != format!("{}_{index:02}", room.name()) {
            return Err(unknown());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(id_seed(id));
        loop {
            if let Some(plan) = Floorplan::try_generate(id, room, index, &mut rng) {
                return Ok(plan);
            }
        }
    }

    fn try_generate(id: &str, room: RoomType, index: usize, rng: &mut ChaCha8Rng) -> Option<Floorplan> {
        let (wall, interior) = fixture_list(room, index);
        let (w, h) = match room {
            RoomType::Kitchen => (rng.gen_range(8..=10), rng.gen_range(6..=8)),
            _ => (rng.gen_range(6..=9), rng.gen_range(5..=7)),
        };
        let rows: Vec<String> = (0..h + 2)
            .map(|y| {
                (0..w + 2)
                    .map(|x| if x == 0 || y == 0 || x == w + 1 || y == h + 1 { '#' } else { '.' })
                    .collect()
            })
            .collect();
        let corner = |c: Cell| (c.x == 1 || c.x == w) && (c.y == 1 || c.y == h);
        let mut perimeter: Vec<Cell> = (1..=w)
            .flat_map(|x| (1..=h).map(move |y| Cell::new(x, y)))
            .filter(|c| (c.x == 1 || c.x == w || c.y == 1 || c.y == h) && !corner(*c))
            .collect();
        perimeter.shuffle(rng);
        let mut used: BTreeSet<Cell> = BTreeSet::new();
        let mut fixtures = Vec::new();

        if has_sink(room) {
            let (sink, tap) = perimeter.iter().find_map(|s| {
                perimeter
                    .iter()
                    .find(|f| f.manhattan(*s) == 1)
                    .map(|f| (*s, *f))
            })?;
            for (t, c) in [("Sink", sink), ("Faucet", tap)] {
                used.insert(c);
                fixtures.push(FixturePlacement { object_type: t.into(), cell: c });
            }
        }
        let mut free = perimeter.iter().filter(|c| !used.contains(c)).copied().collect::<Vec<_>>().into_iter();
        for t in wall {
            let c = free.next()?;
            used.insert(c);
            fixtures.push(FixturePlacement { object_type: t.into(), cell: c });
        }
        let mut core: Vec<Cell> = (3..=w - 2).flat_map(|x| (3..=h - 2).map(move |y| Cell::new(x, y))).collect();
        core.shuffle(rng);
        for (t, c) in interior.into_iter().zip(core) {
            fixtures.push(FixturePlacement { object_type: t.into(), cell: c });
        }
        let plan = Floorplan {
            version: FLOORPLAN_FORMAT_VERSION,
            floorplan_id: id.to_string(),
            room_type: room,
            rows,
            fixtures,
        };
        plan.validate().ok().map(|_| plan)
    }

    pub fn layout(&self) -> Layout {
        Layout::from_rows(self.rows.clone())
    }

    pub fn fixture_id(p: &FixturePlacement) -> String {
        let elevation = catalog::lookup(&p.object_type).map(|i| i.elevation_cm).unwrap_or(0);
        format_object_id(&p.object_type, p.cell.x as f64, elevation as f64 / 100.0, p.cell.y as f64)
    }

    pub fn has_fixture(&self, object_type: &str) -> bool {
        self.fixtures.iter().any(|f| f.object_type == object_type)
    }

    /// Floor cells not occupied by fixtures.
    pub fn free_cells(&self) -> Vec<Cell> {
        let layout = self.layout();
        let taken: BTreeSet<Cell> = self.fixtures.iter().map(|f| f.cell).collect();
        (0..layout.height)
            .flat_map(|y| (0..layout.width).map(move |x| Cell::new(x, y)))
            .filter(|c| layout.is_floor(*c) && !taken.contains(c))
            .collect()
    }

    /// Fixtures sit on floor cells with a free neighbour, and free floor is connected.
    pub fn validate(&self) -> Result<(), FloorplanError> {
        let bad = |m: String| FloorplanError::Invalid {
            id: self.floorplan_id.clone(),
            message: m,
        };
        if self.version != FLOORPLAN_FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", self.version)));
        }
        let layout = self.layout();
        let free: BTreeSet<Cell> = self.free_cells().into_iter().collect();
        let mut seen = BTreeSet::new();
        for f in &self.fixtures {
            let info = catalog::lookup(&f.object_type).ok_or_else(|| bad(format!("unknown type {}", f.object_type)))?;
            if !info.fixture {
                return Err(bad(format!("{} is not a fixture type", f.object_type)));
            }
            if !layout.is_floor(f.cell) || !seen.insert(f.cell) {
                return Err(bad(format!("{} at {} is on a wall or shared cell", f.object_type, f.cell)));
            }
            let open = [(0, 1), (1, 0), (0, -1), (-1, 0)]
                .iter()
                .any(|(dx, dy)| free.contains(&f.cell.offset(*dx, *dy)));
            if !open {
                return Err(bad(format!("{} at {} has no free neighbour", f.object_type, f.cell)));
            }
        }
        let Some(start) = free.iter().next() else {
            return Err(bad("no free floor".into()));
        };
        let mut reached = BTreeSet::from([*start]);
        let mut queue = VecDeque::from([*start]);
        while let Some(c) = queue.pop_front() {
            for (dx, dy) in [(0, 1), (1, 0), (0, -1), (-1, 0)] {
                let n = c.offset(dx, dy);
                if free.contains(&n) && reached.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if reached.len() != free.len() {
            return Err(bad("free floor is not connected".into()));
        }
        Ok(())
    }

    /// An empty world with this plan's fixtures; the Follower starts on the
    /// first free cell facing north.
    pub fn to_world(&self) -> WorldState {
        let start = self.free_cells().first().copied().unwrap_or(Cell::new(0, 0));
        let mut world = WorldState::new(self.layout(), Pose::new(start, Heading::N));
        for f in &self.fixtures {
            let info = catalog::lookup(&f.object_type).expect("validated fixture type");
            let mut o = ObjectInstance::new(Floorplan::fixture_id(f), info);
            o.cell = Some(f.cell);
            world.insert(o);
        }
        world
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("floorplan serializes")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Floorplan, FloorplanError> {
        let plan: Floorplan = serde_json::from_str(text).map_err(|e| FloorplanError::Format {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    /// Every `*.json` file in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Floorplan>, FloorplanError> {
        let io = |e| FloorplanError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).map_err(|e| FloorplanError::Io {
                    path: p.display().to_string(),
                    source: e,
                })?;
                Floorplan::from_json(&text, &p.display().to_string())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_plans_are_valid_and_stable() {
        let ids = Floorplan::builtin_ids();
        assert_eq!(ids.len(), 25);
        for id in &ids {
            let a = Floorplan::builtin(id).unwrap();
            a.validate().unwrap();
            assert_eq!(a, Floorplan::builtin(id).unwrap());
            a.to_world().validate().unwrap();
        }
        assert!(Floorplan::builtin("kitchen_10").is_err());
        assert!(Floorplan::builtin("garage_00").is_err());
    }

    #[test]
    fn sinks_have_running_water() {
        for plan in Floorplan::builtin_all().iter().filter(|p| has_sink(p.room_type)) {
            let sink = plan.fixtures.iter().find(|f| f.object_type == "Sink").unwrap();
            let tap = plan.fixtures.iter().find(|f| f.object_type == "Faucet").unwrap();
            assert_eq!(sink.cell.manhattan(tap.cell), 1);
        }
    }
}
