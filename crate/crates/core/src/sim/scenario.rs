//! Seeded task scenarios: a floorplan populated with the objects a task needs
//! plus distractors, in a state that does not already satisfy the task.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Floorplan, RoomType, RuleSet, SessionFormatError};
use crate::checker::{CheckError, Slot, TaskTree};
use crate::tdl::{Determiner, GroundTask, TaskLibrary};
use crate::world::{catalog, format_object_id, Cell, Heading, PropValue, Pose, Property, WorldState};

pub const MAX_SCENARIO_RETRIES: usize = 1000;

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

const SLICES: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub floorplan_id: String,
    pub task_name: String,
    pub task_params: Vec<String>,
    pub seed: u64,
    pub initial_state: WorldState,
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    version: u32,
    #[serde(flatten)]
    inner: T,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&Versioned {
            version: SCENARIO_FORMAT_VERSION,
            inner: self,
        })
        .expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario, SessionFormatError> {
        let v: Versioned<Scenario> = serde_json::from_str(text).map_err(|e| SessionFormatError::Format(e.to_string()))?;
        if v.version != SCENARIO_FORMAT_VERSION {
            return Err(SessionFormatError::Version(v.version));
        }
        Ok(v.inner)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("{task} cannot be set up on {floorplan}: {reason}")]
    Unsatisfiable { task: String, floorplan: String, reason: String },
    #[error("no valid scenario for {task} on {floorplan} after {retries} attempts")]
    Exhausted { task: String, floorplan: String, retries: usize },
}

fn distractor_pool(room: RoomType) -> &'static [&'static str] {
    match room {
        RoomType::Kitchen => &["Apple", "Spoon", "Fork", "Cup", "Bowl", "Pan", "Cloth", "Tomato", "Newspaper"],
        RoomType::Livingroom => &["RemoteControl", "Book", "KeyChain", "Newspaper", "Pillow", "Watch", "Candle", "Cup"],
        RoomType::Bedroom => &["Book", "Pillow", "Watch", "KeyChain", "Cloth", "Candle", "Mug"],
        RoomType::Bathroom => &["SoapBar", "Cloth", "Candle", "Cup", "TissueBox"],
    }
}

/// Catalog types an atomic slot's primary condition can match.
fn pool(tree: &TaskTree, slot: &Slot) -> Vec<String> {
    let comp = &slot.comp;
    match comp.conditions.get(&comp.primary_condition) {
        Some(PropValue::Str(s)) if comp.primary_condition == Property::ObjectType => vec![s.clone()],
        Some(PropValue::Str(s)) if comp.primary_condition == Property::ObjectClass => tree
            .hierarchy()
            .expand(s)
            .into_iter()
            .filter(|t| catalog::lookup(t).is_some())
            .collect(),
        _ => Vec::new(),
    }
}

/// Spawnable stand-in: sliced types come from their whole source.
fn spawn_type(t: &str) -> &str {
    catalog::slice_source(t).unwrap_or(t)
}

struct Requirement {
    pool: Vec<String>,
    count: usize,
}

fn requirements(tree: &TaskTree, plan: &Floorplan, task: &str) -> Result<Vec<Requirement>, ScenarioError> {
    let mut out = Vec::new();
    for slot in &tree.slots {
        let pool = pool(tree, slot);
        let unsat = |reason: String| ScenarioError::Unsatisfiable {
            task: task.to_string(),
            floorplan: plan.floorplan_id.clone(),
            reason,
        };
        if pool.is_empty() {
            return Err(unsat(format!("component `{}` matches no known object type", slot.key)));
        }
        for need in appliances(&slot.comp.conditions) {
            if !need.iter().any(|t| plan.has_fixture(t)) {
                return Err(unsat(format!("needs a {}", need.join(" or "))));
            }
        }
        let fixture = pool.iter().all(|t| catalog::lookup(spawn_type(t)).is_some_and(|i| i.fixture));
        if fixture {
            if !pool.iter().any(|t| plan.has_fixture(t)) {
                return Err(unsat(format!("needs a {} fixture", pool.join(" or "))));
            }
            continue;
        }
        let count = if slot.comp.instance_shareable {
            1
        } else {
            match slot.det {
                Determiner::Count(n) => n as usize,
                Determiner::All => 0,
                _ => 1,
            }
        };
        let pool: Vec<String> = pool
            .into_iter()
            .filter(|t| catalog::lookup(spawn_type(t)).is_some_and(|i| !i.fixture))
            .collect();
        out.push(Requirement { pool, count });
    }
    Ok(out)
}

/// Fixtures that can bring about a goal condition.
fn appliances(conditions: &indexmap::IndexMap<Property, PropValue>) -> Vec<&'static [&'static str]> {
    conditions
        .iter()
        .filter_map(|(p, v)| match (p, v.as_int()) {
            (Property::IsDirty, Some(0)) => Some(&["Faucet"][..]),
            (Property::IsCooked, Some(1)) => Some(&["Toaster", "Microwave"][..]),
            (Property::IsBoiled, Some(1)) => Some(&["StoveBurner"][..]),
            (Property::IsFilledWithCoffee, Some(1)) => Some(&["CoffeeMachine"][..]),
            _ => None,
        })
        .collect()
}

fn place_targets(world: &WorldState, item: &str) -> Vec<String> {
    world
        .objects
        .values()
        .filter(|o| o.cell.is_some())
        .filter(|o| {
            o.info().is_some_and(|i| {
                i.receptacle && i.accepts == catalog::Accepts::Anything && {
                    let cap = if i.name == "Sink" { 1 } else { i.capacity.saturating_sub(2) };
                    world.children(&o.object_id).len() < cap
                }
            })
        })
        .filter(|o| item != "BreadSliced" || o.object_type() != "Fridge")
        .map(|o| o.object_id.clone())
        .collect()
}

fn spawn(world: &mut WorldState, t: &str, rng: &mut ChaCha8Rng) -> bool {
    let info = catalog::lookup(t).expect("catalog type");
    let targets = place_targets(world, t);
    let Some(parent) = targets.choose(rng).cloned() else {
        return false;
    };
    let cell = world.objects[&parent].cell.expect("fixture cell");
    let mut k = world.children(&parent).len();
    let mut id = format_object_id(t, cell.x as f64 + 0.1 * k as f64, 1.0, cell.y as f64);
    while world.objects.contains_key(&id) {
        k += 1;
        id = format_object_id(t, cell.x as f64 + 0.1 * k as f64, 1.0, cell.y as f64);
    }
    let mut o = crate::world::ObjectInstance::new(id, info);
    if info.dirtyable && rng.gen_bool(0.5) {
        o.set(Property::IsDirty, PropValue::Int(1));
    }
    o.set(Property::ParentReceptacles, PropValue::str(parent));
    world.insert(o);
    true
}

fn mix(seed: u64, text: &str) -> u64 {
    text.bytes()
        .fold(seed ^ 0x9e3779b97f4a7c15, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn attempt(
    tree: &TaskTree,
    plan: &Floorplan,
    reqs: &[Requirement],
    rng: &mut ChaCha8Rng,
    rules: &RuleSet,
) -> Option<WorldState> {
    let mut world = plan.to_world();
    let mut relevant: BTreeSet<&str> = BTreeSet::new();
    for r in reqs {
        relevant.extend(r.pool.iter().map(|t| t.as_str()));
        let count = if r.count == 0 { rng.gen_range(1..=3) } else { r.count };
        let mut remaining = count;
        while remaining > 0 {
            let t = r.pool.choose(rng)?;
            let base = spawn_type(t);
            if !spawn(&mut world, base, rng) {
                return None;
            }
            let made = if base != t { SLICES } else { 1 };
            remaining = remaining.saturating_sub(made);
        }
    }
    let room_pool: Vec<&str> = distractor_pool(plan.room_type)
        .iter()
        .copied()
        .filter(|t| !relevant.contains(t) && !relevant.iter().any(|r| catalog::slice_source(r) == Some(*t)))
        .collect();
    for _ in 0..rng.gen_range(2..=6) {
        if let Some(t) = room_pool.choose(rng) {
            spawn(&mut world, t, rng);
        }
    }
    if !plan.has_fixture("Faucet") {
        for o in world.objects.values_mut() {
            if o.info().is_some_and(|i| i.pickupable && i.fillable) {
                o.set(Property::IsFilledWithLiquid, PropValue::Int(1));
            }
        }
    }
    let free: Vec<Cell> = plan.free_cells();
    let cell = *free.choose(rng)?;
    let heading = *Heading::ALL.choose(rng)?;
    world.follower = Pose::new(cell, heading);
    world.commander.cell = cell;
    world.commander.heading = heading;
    rules.run(&mut world);

    if tree.evaluate(&world).success {
        return None;
    }
    Some(world)
}

/// Seeded scenario for `ground` on `plan`; deterministic per (task, plan, seed).
pub fn generate_scenario(ground: &GroundTask, plan: &Floorplan, seed: u64, lib: &TaskLibrary) -> Result<Scenario, ScenarioError> {
    let tree = TaskTree::build(ground, lib)?;
    let task = ground.source_task.clone();
    let reqs = requirements(&tree, plan, &task)?;
    let key = format!("{}|{}|{}", task, ground.params.join(","), plan.floorplan_id);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, &key));
    let rules = RuleSet::shipped();
    for _ in 0..MAX_SCENARIO_RETRIES {
        if let Some(world) = attempt(&tree, plan, &reqs, &mut rng, &rules) {
            if preconditions_hold(&tree, &world) {
                return Ok(Scenario {
                    floorplan_id: plan.floorplan_id.clone(),
                    task_name: task,
                    task_params: ground.params.clone(),
                    seed,
                    initial_state: world,
                });
            }
        }
    }
    Err(ScenarioError::Exhausted {
        task,
        floorplan: plan.floorplan_id.clone(),
        retries: MAX_SCENARIO_RETRIES,
    })
}

/// Every component has enough objects, counting uncut sources as their slices.
fn preconditions_hold(tree: &TaskTree, world: &WorldState) -> bool {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in world.objects.values() {
        *counts.entry(o.object_type()).or_default() += 1;
    }
    tree.slots.iter().all(|slot| {
        let have: usize = pool(tree, slot)
            .iter()
            .map(|t| {
                let direct = counts.get(t.as_str()).copied().unwrap_or(0);
                let from_source = catalog::slice_source(t)
                    .map(|s| counts.get(s).copied().unwrap_or(0) * SLICES)
                    .unwrap_or(0);
                direct + from_source
            })
            .sum();
        let need = match slot.det {
            Determiner::Count(n) if !slot.comp.instance_shareable => n as usize,
            _ => 1,
        };
        have >= need
    })
}
